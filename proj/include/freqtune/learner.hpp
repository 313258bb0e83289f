#pragma once

#include "freqtune/calltree.hpp"
#include "freqtune/energymodel.hpp"
#include "freqtune/freqspace.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace freqtune
{

struct LearnerConfig
{
    double alpha = 0.1;      ///< learning rate, [0, 1]
    double gamma = 0.5;      ///< discount, [0, 1)
    double epsilon = 0.25;   ///< exploration probability, [0, 1]
    double stay_bias = -0.1; ///< initial Q of "stay" at the start state

    bool operator==(const LearnerConfig &) const = default;
};

/// Throws InvalidConfig when a field is out of range.
void validate_learner(const LearnerConfig &cfg);

/// State-action map over a frequency grid. Entries exist exactly for the
/// valid (state, action) pairs. Besides Q it keeps the last energy seen at
/// each state and which states have been visited; an entry counts as
/// "learned" once update_q or neighbour seeding has written it.
class QTable
{
public:
    explicit QTable(FrequencyGrid grid);

    const FrequencyGrid &grid() const
    {
        return grid_;
    }

    bool has_entry(ConfigState s, ActionDelta a) const
    {
        return is_valid_action(grid_, s, a);
    }

    /// Throws InvalidEntry for an invalid (state, action) pair.
    double q(ConfigState s, ActionDelta a) const;
    bool is_learned(ConfigState s, ActionDelta a) const;

    /// Writes the value and marks the entry learned.
    void set_q(ConfigState s, ActionDelta a, double value);
    /// Writes the value without marking it learned (initialisation, restore).
    void set_initial_q(ConfigState s, ActionDelta a, double value);
    void set_learned(ConfigState s, ActionDelta a, bool learned);

    /// Maximum over valid actions at s.
    double max_q(ConfigState s) const;

    bool visited(ConfigState s) const;
    void mark_visited(ConfigState s);
    std::vector<ConfigState> visited_states() const;

    const std::optional<EnergySample> &last_energy(ConfigState s) const;
    /// Stores the sample and marks the state visited.
    void record_energy(ConfigState s, const EnergySample &sample);

    bool operator==(const QTable &) const = default;

private:
    std::size_t slot(ConfigState s, ActionDelta a) const;

    FrequencyGrid grid_;
    std::vector<std::array<double, kActionCount>> q_;
    std::vector<std::array<bool, kActionCount>> learned_;
    std::vector<std::optional<EnergySample>> last_energy_;
    std::vector<bool> visited_;
};

/// All entries 0 except Q(start, stay) = cfg.stay_bias; visited = {start}.
QTable init_qtable(const FrequencyGrid &grid, ConfigState start, const LearnerConfig &cfg);

/// Normalised energy difference (E_t - E_t+1) / (0.5 (E_t + E_t+1)).
/// Positive iff the energy went down. Throws DegenerateEnergy on a zero sum.
double normalised_energy_reward(double e_prev_j, double e_curr_j);
double compute_reward(const EnergySample &e_prev, const EnergySample &e_curr);

/// Q(s,a) += alpha [r + gamma max_a' Q(s',a') - Q(s,a)]; returns the new Q.
/// Throws InvalidEntry if (s_t, a_t) is not an entry or s_next does not
/// follow from it.
double update_q(QTable &table, ConfigState s_t, ActionDelta a_t, double reward, ConfigState s_next,
    const LearnerConfig &cfg);

/// First valid action in kActionOrder with maximal Q.
ActionDelta greedy_action(const QTable &table, ConfigState s);

struct Selection
{
    ActionDelta action;
    bool explored = false;
};

/// Epsilon-greedy. The random branch draws uniformly over all valid actions.
/// Always consumes exactly one uniform draw, plus one more when exploring.
Selection select_action(const QTable &table, ConfigState s, const LearnerConfig &cfg, Rng &rng);

/// Fills not-yet-learned entries at `s_new` whose target is a visited
/// neighbour with a stored energy, using the reward that moving there would
/// yield according to the stored energies. Needs a stored energy at s_new.
/// Returns the number of entries written.
std::size_t seed_from_neighbors(QTable &table, ConfigState s_new);

/// Bookkeeping for one runtime situation. `current` is where the next
/// invocation runs; prev/prev_action/prev_energy describe the last decision
/// and are either all set or all empty.
struct TunerState
{
    RtsId rts;
    ConfigState current;
    std::optional<ConfigState> prev;
    std::optional<ActionDelta> prev_action;
    std::optional<EnergySample> prev_energy;
    bool prev_explored = false;
    std::uint64_t step = 0;

    bool operator==(const TunerState &) const = default;
};

TunerState make_tuner_state(RtsId rts, ConfigState start);

/// One completed transition: state_before --action--> state_after, with the
/// energy measured at state_after and the resulting update.
struct StepRecord
{
    std::uint64_t step = 0;
    ConfigState state_before;
    ActionDelta action;
    ConfigState state_after;
    double energy_j = 0.0;
    double reward = 0.0;
    double q_after = 0.0;
    bool explored = false;

    bool operator==(const StepRecord &) const = default;
};

struct TunerOutcome
{
    ConfigState next;
    std::optional<StepRecord> record; ///< empty on the first measurement
};

/// Feeds the energy measured at ts.current into the learner and picks where
/// to run next. The first call only stores E_0 and selects.
TunerOutcome tuner_step(TunerState &ts, QTable &table, const EnergySample &e_curr, const LearnerConfig &cfg, Rng &rng);

} // namespace freqtune
