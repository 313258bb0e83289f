#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace freqtune
{

enum class NodeKind
{
    Function,
    Parameter,
};

struct PathSegment
{
    NodeKind kind = NodeKind::Function;
    std::string name;
    std::optional<std::string> value; ///< parameter segments only

    auto operator<=>(const PathSegment &) const = default;
};

/// Identity of a runtime situation: the root-to-node path of the call tree.
///
/// Text form joins segments with '/', renders parameters as name=value and
/// backslash-escapes '\', '/' and '=' inside names and values, e.g.
/// "main/phase=sweep/kernel".
class RtsId
{
public:
    RtsId() = default;
    explicit RtsId(std::vector<PathSegment> segments);

    /// Throws InvalidEvent on malformed text.
    static RtsId parse(std::string_view text);

    std::span<const PathSegment> segments() const
    {
        return segments_;
    }
    std::size_t size() const
    {
        return segments_.size();
    }
    bool empty() const
    {
        return segments_.empty();
    }

    std::string str() const;

    auto operator<=>(const RtsId &) const = default;

private:
    std::vector<PathSegment> segments_;
};

using NodeId = std::size_t;

struct CallTreeNode
{
    NodeKind kind = NodeKind::Function;
    std::string name;
    std::optional<std::string> param_value;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
    std::uint64_t call_count = 0;
    double total_time_ms = 0.0;

    double mean_time_ms() const
    {
        return call_count == 0 ? 0.0 : total_time_ms / static_cast<double>(call_count);
    }

    bool operator==(const CallTreeNode &) const = default;
};

struct RegionEvent
{
    enum class Kind
    {
        Enter,
        Exit,
        Parameter,
    };

    Kind kind = Kind::Enter;
    std::string name;
    std::optional<std::string> value;
    double timestamp_ms = 0.0;

    bool operator==(const RegionEvent &) const = default;
};

/// Dynamic call tree of instrumented functions and user parameters, rooted at
/// "main". Keeps the currently open path and profiles inclusive runtime on
/// function nodes.
class CallTree
{
public:
    NodeId enter_region(std::string_view name, double timestamp_ms);

    /// Closes the innermost open function (and any parameters opened inside
    /// it). Throws MismatchedExit if `name` is not that function.
    double exit_region(std::string_view name, double timestamp_ms);

    /// Opens the parameter node (name, value) under the current node. A
    /// parameter with the same name already open inside the innermost
    /// function is replaced, so its values become siblings.
    NodeId set_parameter(std::string_view name, std::string_view value);

    /// Closes an open parameter of that name inside the innermost function
    /// (and everything opened after it). No-op if none is open.
    void unset_parameter(std::string_view name);

    void apply(const RegionEvent &event);

    bool empty() const
    {
        return nodes_.empty();
    }
    std::size_t size() const
    {
        return nodes_.size();
    }
    NodeId root() const;
    const CallTreeNode &node(NodeId id) const
    {
        return nodes_.at(id);
    }

    /// Open nodes from the root to the current node.
    std::span<const NodeId> open_path() const
    {
        return path_;
    }
    std::optional<NodeId> current() const;

    RtsId rts_path(NodeId id) const;
    std::optional<NodeId> find(const RtsId &rts) const;

    /// Function nodes directly below `id`, looking through parameter nodes.
    std::vector<NodeId> function_children(NodeId id) const;

    bool operator==(const CallTree &) const = default;

private:
    NodeId child(NodeId parent, NodeKind kind, std::string_view name, const std::optional<std::string> &value);

    std::vector<CallTreeNode> nodes_;
    std::vector<NodeId> path_;
    std::vector<double> enter_times_; // one per open function node
};

RtsId rts_path(const CallTree &tree, NodeId node);

/// Filtering rule for short regions. The node must be a function whose mean
/// inclusive runtime exceeds `threshold_ms`. A leaf then qualifies; an
/// internal node qualifies only when its children with mean runtime below the
/// threshold account for more accumulated time than those at or above it.
bool is_tuning_candidate(const CallTree &tree, NodeId node, double threshold_ms = 100.0);

/// All function nodes with call_count >= 1 that pass is_tuning_candidate.
std::vector<NodeId> tuning_candidates(const CallTree &tree, double threshold_ms = 100.0);

void replay(CallTree &tree, std::span<const RegionEvent> events);

/// One JSON object per line: {"kind":"enter"|"exit"|"parameter","name":..,
/// "value":..,"t_ms":..}. Blank lines are skipped. Throws InvalidEvent.
std::vector<RegionEvent> read_event_stream(std::istream &in);
RegionEvent parse_event_line(std::string_view line);
std::string format_event_line(const RegionEvent &event);

} // namespace freqtune
