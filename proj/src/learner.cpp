#include "freqtune/learner.hpp"

#include "freqtune/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace freqtune
{

namespace
{

bool in_range(double v, double lo, double hi)
{
    return std::isfinite(v) && v >= lo && v <= hi;
}

} // namespace

void validate_learner(const LearnerConfig &cfg)
{
    if (!in_range(cfg.alpha, 0.0, 1.0))
    {
        throw Error(ErrorCode::InvalidConfig, fmt::format("alpha {} outside [0, 1]", cfg.alpha));
    }
    if (!in_range(cfg.gamma, 0.0, 1.0) || cfg.gamma >= 1.0)
    {
        throw Error(ErrorCode::InvalidConfig, fmt::format("gamma {} outside [0, 1)", cfg.gamma));
    }
    if (!in_range(cfg.epsilon, 0.0, 1.0))
    {
        throw Error(ErrorCode::InvalidConfig, fmt::format("epsilon {} outside [0, 1]", cfg.epsilon));
    }
    if (!std::isfinite(cfg.stay_bias))
    {
        throw Error(ErrorCode::InvalidConfig, "stay_bias must be finite");
    }
}

QTable::QTable(FrequencyGrid grid)
    : grid_(std::move(grid)),
      q_(grid_.size(), std::array<double, kActionCount>{}),
      learned_(grid_.size(), std::array<bool, kActionCount>{}),
      last_energy_(grid_.size()),
      visited_(grid_.size(), false)
{
}

std::size_t QTable::slot(ConfigState s, ActionDelta a) const
{
    if (!has_entry(s, a))
    {
        throw Error(ErrorCode::InvalidEntry,
            fmt::format("no Q entry for state ({},{}) action ({},{})", s.core_idx, s.uncore_idx, a.core_delta,
                a.uncore_delta));
    }
    return grid_.flat_index(s);
}

double QTable::q(ConfigState s, ActionDelta a) const
{
    return q_[slot(s, a)][action_index(a)];
}

bool QTable::is_learned(ConfigState s, ActionDelta a) const
{
    return learned_[slot(s, a)][action_index(a)];
}

void QTable::set_q(ConfigState s, ActionDelta a, double value)
{
    const auto i = slot(s, a);
    q_[i][action_index(a)] = value;
    learned_[i][action_index(a)] = true;
}

void QTable::set_initial_q(ConfigState s, ActionDelta a, double value)
{
    q_[slot(s, a)][action_index(a)] = value;
}

void QTable::set_learned(ConfigState s, ActionDelta a, bool learned)
{
    learned_[slot(s, a)][action_index(a)] = learned;
}

double QTable::max_q(ConfigState s) const
{
    return q(s, greedy_action(*this, s));
}

bool QTable::visited(ConfigState s) const
{
    return grid_.contains(s) && visited_[grid_.flat_index(s)];
}

void QTable::mark_visited(ConfigState s)
{
    if (!grid_.contains(s))
    {
        throw Error(ErrorCode::InvalidEntry, fmt::format("state ({},{}) outside the grid", s.core_idx, s.uncore_idx));
    }
    visited_[grid_.flat_index(s)] = true;
}

std::vector<ConfigState> QTable::visited_states() const
{
    std::vector<ConfigState> out;
    for (std::size_t i = 0; i < visited_.size(); ++i)
    {
        if (visited_[i])
        {
            out.push_back(grid_.state_at(i));
        }
    }
    return out;
}

const std::optional<EnergySample> &QTable::last_energy(ConfigState s) const
{
    if (!grid_.contains(s))
    {
        throw Error(ErrorCode::InvalidEntry, fmt::format("state ({},{}) outside the grid", s.core_idx, s.uncore_idx));
    }
    return last_energy_[grid_.flat_index(s)];
}

void QTable::record_energy(ConfigState s, const EnergySample &sample)
{
    mark_visited(s);
    last_energy_[grid_.flat_index(s)] = sample;
}

QTable init_qtable(const FrequencyGrid &grid, ConfigState start, const LearnerConfig &cfg)
{
    QTable table(grid);
    table.set_initial_q(start, kStay, cfg.stay_bias);
    table.mark_visited(start);
    return table;
}

double normalised_energy_reward(double e_prev_j, double e_curr_j)
{
    const double sum = e_prev_j + e_curr_j;
    if (sum == 0.0 || !std::isfinite(sum))
    {
        throw Error(ErrorCode::DegenerateEnergy,
            fmt::format("cannot normalise energies {} J and {} J", e_prev_j, e_curr_j));
    }
    return (e_prev_j - e_curr_j) / (0.5 * sum);
}

double compute_reward(const EnergySample &e_prev, const EnergySample &e_curr)
{
    return normalised_energy_reward(e_prev.joules, e_curr.joules);
}

double update_q(QTable &table, ConfigState s_t, ActionDelta a_t, double reward, ConfigState s_next,
    const LearnerConfig &cfg)
{
    if (!table.has_entry(s_t, a_t))
    {
        throw Error(ErrorCode::InvalidEntry,
            fmt::format("no Q entry for state ({},{}) action ({},{})", s_t.core_idx, s_t.uncore_idx, a_t.core_delta,
                a_t.uncore_delta));
    }
    if (apply_action(table.grid(), s_t, a_t) != s_next)
    {
        throw Error(ErrorCode::InvalidEntry, "next state does not follow from the state and action");
    }
    const double old_q = table.q(s_t, a_t);
    const double target = reward + cfg.gamma * table.max_q(s_next);
    const double new_q = old_q + cfg.alpha * (target - old_q);
    table.set_q(s_t, a_t, new_q);
    return new_q;
}

ActionDelta greedy_action(const QTable &table, ConfigState s)
{
    std::optional<ActionDelta> best;
    double best_q = 0.0;
    for (const auto a : kActionOrder)
    {
        if (!table.has_entry(s, a))
        {
            continue;
        }
        const double v = table.q(s, a);
        if (!best || v > best_q)
        {
            best = a;
            best_q = v;
        }
    }
    if (!best)
    {
        throw Error(ErrorCode::InvalidEntry, fmt::format("state ({},{}) outside the grid", s.core_idx, s.uncore_idx));
    }
    return *best;
}

Selection select_action(const QTable &table, ConfigState s, const LearnerConfig &cfg, Rng &rng)
{
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < cfg.epsilon)
    {
        const auto actions = valid_actions(table.grid(), s);
        std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
        return {actions[pick(rng)], true};
    }
    return {greedy_action(table, s), false};
}

std::size_t seed_from_neighbors(QTable &table, ConfigState s_new)
{
    const auto &here = table.last_energy(s_new);
    if (!here)
    {
        return 0;
    }
    std::size_t written = 0;
    for (const auto a : valid_actions(table.grid(), s_new))
    {
        if (a.is_stay() || table.is_learned(s_new, a))
        {
            continue;
        }
        const ConfigState neighbour = apply_action(table.grid(), s_new, a);
        if (!table.visited(neighbour))
        {
            continue;
        }
        const auto &there = table.last_energy(neighbour);
        if (!there)
        {
            continue;
        }
        table.set_q(s_new, a, compute_reward(*here, *there));
        ++written;
    }
    return written;
}

TunerState make_tuner_state(RtsId rts, ConfigState start)
{
    TunerState ts;
    ts.rts = std::move(rts);
    ts.current = start;
    return ts;
}

TunerOutcome tuner_step(TunerState &ts, QTable &table, const EnergySample &e_curr, const LearnerConfig &cfg, Rng &rng)
{
    const ConfigState here = ts.current;
    std::optional<StepRecord> record;

    if (!ts.prev)
    {
        table.record_energy(here, e_curr);
    }
    else
    {
        const double reward = compute_reward(*ts.prev_energy, e_curr);
        const bool newly_visited = !table.visited(here);
        const double q_after = update_q(table, *ts.prev, *ts.prev_action, reward, here, cfg);
        table.record_energy(here, e_curr);
        if (newly_visited)
        {
            seed_from_neighbors(table, here);
        }
        record = StepRecord{ts.step + 1, *ts.prev, *ts.prev_action, here, e_curr.joules, reward, q_after,
            ts.prev_explored};
        ++ts.step;
    }

    const Selection sel = select_action(table, here, cfg, rng);
    const ConfigState next = apply_action(table.grid(), here, sel.action);
    ts.prev = here;
    ts.prev_action = sel.action;
    ts.prev_energy = e_curr;
    ts.prev_explored = sel.explored;
    ts.current = next;
    return {next, record};
}

} // namespace freqtune
