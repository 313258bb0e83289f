#include "freqtune/calltree.hpp"

#include "freqtune/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace freqtune
{

namespace
{

constexpr std::string_view kRootName = "main";

void append_escaped(std::string &out, std::string_view text)
{
    for (char c : text)
    {
        if (c == '\\' || c == '/' || c == '=')
        {
            out.push_back('\\');
        }
        out.push_back(c);
    }
}

void require_name(std::string_view name, const char *what)
{
    if (name.empty())
    {
        throw Error(ErrorCode::InvalidEvent, fmt::format("{} name must not be empty", what));
    }
}

} // namespace

RtsId::RtsId(std::vector<PathSegment> segments) : segments_(std::move(segments))
{
}

std::string RtsId::str() const
{
    std::string out;
    for (std::size_t i = 0; i < segments_.size(); ++i)
    {
        if (i > 0)
        {
            out.push_back('/');
        }
        const auto &seg = segments_[i];
        append_escaped(out, seg.name);
        if (seg.kind == NodeKind::Parameter)
        {
            out.push_back('=');
            append_escaped(out, seg.value.value_or(""));
        }
    }
    return out;
}

RtsId RtsId::parse(std::string_view text)
{
    std::vector<PathSegment> segments;
    std::string name;
    std::string value;
    bool in_value = false;
    bool escaped = false;

    auto flush = [&]() {
        if (name.empty())
        {
            throw Error(ErrorCode::InvalidEvent, fmt::format("empty path segment in '{}'", text));
        }
        if (in_value)
        {
            segments.push_back({NodeKind::Parameter, std::move(name), std::move(value)});
        }
        else
        {
            segments.push_back({NodeKind::Function, std::move(name), std::nullopt});
        }
        name.clear();
        value.clear();
        in_value = false;
    };

    for (char c : text)
    {
        std::string &target = in_value ? value : name;
        if (escaped)
        {
            target.push_back(c);
            escaped = false;
        }
        else if (c == '\\')
        {
            escaped = true;
        }
        else if (c == '/')
        {
            flush();
        }
        else if (c == '=')
        {
            if (in_value)
            {
                throw Error(ErrorCode::InvalidEvent, fmt::format("unescaped '=' in value of '{}'", text));
            }
            in_value = true;
        }
        else
        {
            target.push_back(c);
        }
    }
    if (escaped)
    {
        throw Error(ErrorCode::InvalidEvent, fmt::format("dangling escape in '{}'", text));
    }
    flush();
    return RtsId(std::move(segments));
}

NodeId CallTree::root() const
{
    if (nodes_.empty())
    {
        throw Error(ErrorCode::InvalidEvent, "call tree has no root yet");
    }
    return 0;
}

std::optional<NodeId> CallTree::current() const
{
    if (path_.empty())
    {
        return std::nullopt;
    }
    return path_.back();
}

NodeId CallTree::child(NodeId parent, NodeKind kind, std::string_view name, const std::optional<std::string> &value)
{
    for (NodeId c : nodes_[parent].children)
    {
        const auto &n = nodes_[c];
        if (n.kind == kind && n.name == name && n.param_value == value)
        {
            return c;
        }
    }
    CallTreeNode fresh;
    fresh.kind = kind;
    fresh.name = std::string(name);
    fresh.param_value = value;
    fresh.parent = parent;
    nodes_.push_back(std::move(fresh));
    const NodeId id = nodes_.size() - 1;
    nodes_[parent].children.push_back(id);
    return id;
}

NodeId CallTree::enter_region(std::string_view name, double timestamp_ms)
{
    require_name(name, "region");
    NodeId id = 0;
    if (path_.empty())
    {
        if (name != kRootName)
        {
            throw Error(ErrorCode::InvalidEvent,
                fmt::format("region '{}' entered with no open region; the root must be '{}'", name, kRootName));
        }
        if (nodes_.empty())
        {
            CallTreeNode root;
            root.name = std::string(kRootName);
            nodes_.push_back(std::move(root));
        }
    }
    else
    {
        id = child(path_.back(), NodeKind::Function, name, std::nullopt);
    }
    path_.push_back(id);
    enter_times_.push_back(timestamp_ms);
    ++nodes_[id].call_count;
    return id;
}

double CallTree::exit_region(std::string_view name, double timestamp_ms)
{
    auto it = std::find_if(path_.rbegin(), path_.rend(),
        [this](NodeId id) { return nodes_[id].kind == NodeKind::Function; });
    if (it == path_.rend())
    {
        throw Error(ErrorCode::MismatchedExit, fmt::format("exit of '{}' with no open region", name));
    }
    auto &node = nodes_[*it];
    if (node.name != name)
    {
        throw Error(ErrorCode::MismatchedExit,
            fmt::format("exit of '{}' while '{}' is the innermost open region", name, node.name));
    }
    const double elapsed = timestamp_ms - enter_times_.back();
    if (!(elapsed >= 0.0))
    {
        throw Error(ErrorCode::InvalidEvent, fmt::format("exit of '{}' before its enter", name));
    }
    node.total_time_ms += elapsed;
    path_.erase(std::prev(it.base()), path_.end());
    enter_times_.pop_back();
    return elapsed;
}

NodeId CallTree::set_parameter(std::string_view name, std::string_view value)
{
    require_name(name, "parameter");
    if (path_.empty())
    {
        throw Error(ErrorCode::InvalidEvent, fmt::format("parameter '{}' set with no open region", name));
    }
    unset_parameter(name);
    const NodeId id = child(path_.back(), NodeKind::Parameter, name, std::string(value));
    path_.push_back(id);
    return id;
}

void CallTree::unset_parameter(std::string_view name)
{
    for (auto pos = path_.size(); pos-- > 0;)
    {
        const auto &n = nodes_[path_[pos]];
        if (n.kind == NodeKind::Function)
        {
            return;
        }
        if (n.name == name)
        {
            path_.resize(pos);
            return;
        }
    }
}

void CallTree::apply(const RegionEvent &event)
{
    switch (event.kind)
    {
    case RegionEvent::Kind::Enter:
        enter_region(event.name, event.timestamp_ms);
        break;
    case RegionEvent::Kind::Exit:
        exit_region(event.name, event.timestamp_ms);
        break;
    case RegionEvent::Kind::Parameter:
        set_parameter(event.name, event.value.value_or(""));
        break;
    }
}

RtsId CallTree::rts_path(NodeId id) const
{
    std::vector<PathSegment> segments;
    std::optional<NodeId> cursor = id;
    while (cursor)
    {
        const auto &n = nodes_.at(*cursor);
        segments.push_back({n.kind, n.name, n.param_value});
        cursor = n.parent;
    }
    std::reverse(segments.begin(), segments.end());
    return RtsId(std::move(segments));
}

std::optional<NodeId> CallTree::find(const RtsId &rts) const
{
    const auto segs = rts.segments();
    if (nodes_.empty() || segs.empty() || segs.front().kind != NodeKind::Function || segs.front().name != kRootName)
    {
        return std::nullopt;
    }
    NodeId cursor = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
    {
        const auto &children = nodes_[cursor].children;
        auto it = std::find_if(children.begin(), children.end(), [&](NodeId c) {
            const auto &n = nodes_[c];
            return n.kind == segs[i].kind && n.name == segs[i].name && n.param_value == segs[i].value;
        });
        if (it == children.end())
        {
            return std::nullopt;
        }
        cursor = *it;
    }
    return cursor;
}

std::vector<NodeId> CallTree::function_children(NodeId id) const
{
    std::vector<NodeId> out;
    std::vector<NodeId> pending(nodes_.at(id).children.rbegin(), nodes_.at(id).children.rend());
    while (!pending.empty())
    {
        const NodeId c = pending.back();
        pending.pop_back();
        const auto &n = nodes_[c];
        if (n.kind == NodeKind::Function)
        {
            out.push_back(c);
        }
        else
        {
            pending.insert(pending.end(), n.children.rbegin(), n.children.rend());
        }
    }
    return out;
}

RtsId rts_path(const CallTree &tree, NodeId node)
{
    return tree.rts_path(node);
}

bool is_tuning_candidate(const CallTree &tree, NodeId id, double threshold_ms)
{
    const auto &n = tree.node(id);
    if (n.kind != NodeKind::Function || n.call_count == 0 || !(n.mean_time_ms() > threshold_ms))
    {
        return false;
    }
    const auto children = tree.function_children(id);
    if (children.empty())
    {
        return true;
    }
    double short_ms = 0.0;
    double long_ms = 0.0;
    for (NodeId c : children)
    {
        const auto &child = tree.node(c);
        (child.mean_time_ms() < threshold_ms ? short_ms : long_ms) += child.total_time_ms;
    }
    return short_ms > long_ms;
}

std::vector<NodeId> tuning_candidates(const CallTree &tree, double threshold_ms)
{
    std::vector<NodeId> out;
    for (NodeId id = 0; id < tree.size(); ++id)
    {
        if (is_tuning_candidate(tree, id, threshold_ms))
        {
            out.push_back(id);
        }
    }
    return out;
}

void replay(CallTree &tree, std::span<const RegionEvent> events)
{
    for (const auto &e : events)
    {
        tree.apply(e);
    }
}

RegionEvent parse_event_line(std::string_view line)
{
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(line);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw Error(ErrorCode::InvalidEvent, fmt::format("bad event line: {}", e.what()));
    }
    if (!j.is_object() || !j.contains("kind") || !j.contains("name") || !j["kind"].is_string() ||
        !j["name"].is_string())
    {
        throw Error(ErrorCode::InvalidEvent, "event needs string fields 'kind' and 'name'");
    }
    RegionEvent ev;
    const auto kind = j["kind"].get<std::string>();
    if (kind == "enter")
    {
        ev.kind = RegionEvent::Kind::Enter;
    }
    else if (kind == "exit")
    {
        ev.kind = RegionEvent::Kind::Exit;
    }
    else if (kind == "parameter")
    {
        ev.kind = RegionEvent::Kind::Parameter;
    }
    else
    {
        throw Error(ErrorCode::InvalidEvent, fmt::format("unknown event kind '{}'", kind));
    }
    ev.name = j["name"].get<std::string>();
    if (j.contains("value") && !j["value"].is_null())
    {
        ev.value = j["value"].is_string() ? j["value"].get<std::string>() : j["value"].dump();
    }
    if (ev.kind == RegionEvent::Kind::Parameter && !ev.value)
    {
        throw Error(ErrorCode::InvalidEvent, fmt::format("parameter '{}' has no value", ev.name));
    }
    if (j.contains("t_ms"))
    {
        if (!j["t_ms"].is_number())
        {
            throw Error(ErrorCode::InvalidEvent, "'t_ms' must be a number");
        }
        ev.timestamp_ms = j["t_ms"].get<double>();
    }
    else if (ev.kind != RegionEvent::Kind::Parameter)
    {
        throw Error(ErrorCode::InvalidEvent, "enter/exit events need 't_ms'");
    }
    return ev;
}

std::string format_event_line(const RegionEvent &event)
{
    nlohmann::ordered_json j;
    switch (event.kind)
    {
    case RegionEvent::Kind::Enter:
        j["kind"] = "enter";
        break;
    case RegionEvent::Kind::Exit:
        j["kind"] = "exit";
        break;
    case RegionEvent::Kind::Parameter:
        j["kind"] = "parameter";
        break;
    }
    j["name"] = event.name;
    j["value"] = event.value ? nlohmann::ordered_json(*event.value) : nlohmann::ordered_json(nullptr);
    j["t_ms"] = event.timestamp_ms;
    return j.dump();
}

std::vector<RegionEvent> read_event_stream(std::istream &in)
{
    std::vector<RegionEvent> out;
    std::string line;
    while (std::getline(in, line))
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
        {
            continue;
        }
        out.push_back(parse_event_line(line));
    }
    return out;
}

} // namespace freqtune
