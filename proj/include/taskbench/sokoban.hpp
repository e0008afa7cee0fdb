#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taskbench::sokoban {

inline constexpr int kDefaultMaxSteps = 30;

enum class Action : std::uint8_t { Up, Right, Down, Left };

/// Canonical action ordering; also the BFS expansion order.
inline constexpr std::array<Action, 4> kActions{Action::Up, Action::Right, Action::Down, Action::Left};

std::string_view action_name(Action a);
/// Case-insensitive lookup of "Up"/"Right"/"Down"/"Left".
std::optional<Action> action_from_name(std::string_view name);

struct Pos {
    int row = 0;
    int col = 0;
    auto operator<=>(const Pos&) const = default;
};

Pos neighbor(Pos p, Action a);

/// Static part of a level. Border cells are walls; walls and targets never overlap.
class Grid {
public:
    Grid(int width, int height, const std::vector<Pos>& walls, const std::vector<Pos>& targets);

    int width() const { return width_; }
    int height() const { return height_; }
    int cell_count() const { return width_ * height_; }

    bool in_bounds(Pos p) const { return p.row >= 0 && p.col >= 0 && p.row < height_ && p.col < width_; }
    bool is_wall(Pos p) const { return !in_bounds(p) || (cells_[index(p)] & kWall) != 0; }
    bool is_target(Pos p) const { return in_bounds(p) && (cells_[index(p)] & kTarget) != 0; }

    /// A non-target floor cell with walls on two orthogonal sides; a box there never moves again.
    bool is_dead_corner(Pos p) const;

    int index(Pos p) const { return p.row * width_ + p.col; }
    Pos pos(int index) const { return {index / width_, index % width_}; }

    const std::vector<Pos>& targets() const { return targets_; }
    std::vector<Pos> walls() const;

    bool operator==(const Grid& other) const;

private:
    static constexpr std::uint8_t kWall = 1;
    static constexpr std::uint8_t kTarget = 2;

    int width_;
    int height_;
    std::vector<std::uint8_t> cells_;
    std::vector<Pos> targets_;
};

struct SokobanState {
    std::shared_ptr<const Grid> grid;
    std::vector<Pos> boxes;  // kept sorted
    Pos player;
    int steps_taken = 0;

    bool has_box(Pos p) const;
    /// Every box sits on a target.
    bool solved() const;

    bool operator==(const SokobanState& other) const;
};

/// Builds a state and checks the occupancy invariants; throws std::invalid_argument.
SokobanState make_state(std::shared_ptr<const Grid> grid, std::vector<Pos> boxes, Pos player, int steps_taken = 0);

struct RewardSchedule {
    double move_penalty = -0.1;
    double box_on_target = 1.0;
    double box_off_target = -1.0;
    double all_placed_bonus = 10.0;
};

struct StepOutcome {
    SokobanState next_state;
    double reward = 0.0;
    bool success = false;
    bool terminated = false;
    bool moved = false;
};

/// Applies one move. Blocked moves leave positions unchanged but still consume a step.
/// Throws std::invalid_argument if the state is already solved or out of steps.
StepOutcome step(const SokobanState& state, Action action, const RewardSchedule& schedule = {},
                 int max_steps = kDefaultMaxSteps);

/// A turn that produced no usable action: costs a step and the move penalty.
StepOutcome idle_step(const SokobanState& state, const RewardSchedule& schedule = {},
                      int max_steps = kDefaultMaxSteps);

struct SymbolTable {
    std::string wall = "#";
    std::string floor = "_";
    std::string target = "O";
    std::string box = "X";
    std::string player = "P";
    std::string box_on_target = "✓";
    std::string player_on_target = "S";
};

/// One line per row, no trailing newline.
std::string render(const SokobanState& state, const SymbolTable& symbols = {});

/// Inverse of render(); steps_taken is not encoded and comes back as 0.
/// Throws std::invalid_argument on ragged rows, unknown symbols or a missing player.
SokobanState parse_observation(std::string_view text, const SymbolTable& symbols = {});

struct SolveOptions {
    int max_steps = kDefaultMaxSteps;
    bool prune_dead_corners = true;
};

/// Shortest action sequence solving the state within max_steps, or nullopt.
/// Expansion follows kActions order, so the answer is unique for a given state.
std::optional<std::vector<Action>> solve_bfs(const SokobanState& state, const SolveOptions& options = {});

struct PuzzleSpec {
    int width = 6;
    int height = 6;
    int num_boxes = 1;
    int max_steps = kDefaultMaxSteps;
    std::uint64_t seed = 0;
    double wall_density = 0.2;
    int attempt_budget = 10'000;
};

struct Puzzle {
    SokobanState state;
    std::vector<Action> solution;
    int attempts = 0;
};

class GenerationExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Random placement filtered by solve_bfs. Deterministic in spec.seed.
/// Throws GenerationExhausted when no solvable layout appears within the budget.
Puzzle generate_puzzle(const PuzzleSpec& spec);

/// Replays actions from state; true iff the last step solves the puzzle within max_steps.
bool replay_solves(const SokobanState& state, const std::vector<Action>& actions,
                   int max_steps = kDefaultMaxSteps);

}  // namespace taskbench::sokoban
