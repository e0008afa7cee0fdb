#include "taskbench/sokoban.hpp"

#include "taskbench/random.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace taskbench::sokoban {

namespace {

constexpr std::array<std::string_view, 4> kActionNames{"Up", "Right", "Down", "Left"};

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

}  // namespace

std::string_view action_name(Action a) {
    return kActionNames[static_cast<std::size_t>(a)];
}

std::optional<Action> action_from_name(std::string_view name) {
    for (Action a : kActions) {
        if (iequals(name, action_name(a))) return a;
    }
    return std::nullopt;
}

Pos neighbor(Pos p, Action a) {
    switch (a) {
        case Action::Up: return {p.row - 1, p.col};
        case Action::Right: return {p.row, p.col + 1};
        case Action::Down: return {p.row + 1, p.col};
        case Action::Left: return {p.row, p.col - 1};
    }
    return p;
}

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(int width, int height, const std::vector<Pos>& walls, const std::vector<Pos>& targets)
    : width_(width), height_(height) {
    if (width < 3 || height < 3) throw std::invalid_argument("grid must be at least 3x3");
    cells_.assign(static_cast<std::size_t>(width) * height, 0);
    for (Pos w : walls) {
        if (!in_bounds(w)) throw std::invalid_argument("wall out of bounds");
        cells_[index(w)] |= kWall;
    }
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            if (r == 0 || c == 0 || r == height - 1 || c == width - 1) {
                if ((cells_[index({r, c})] & kWall) == 0) throw std::invalid_argument("border cells must be walls");
            }
        }
    }
    for (Pos t : targets) {
        if (!in_bounds(t)) throw std::invalid_argument("target out of bounds");
        auto& cell = cells_[index(t)];
        if (cell & kWall) throw std::invalid_argument("target on a wall");
        if (cell & kTarget) throw std::invalid_argument("duplicate target");
        cell |= kTarget;
    }
    targets_ = targets;
    std::sort(targets_.begin(), targets_.end());
}

bool Grid::is_dead_corner(Pos p) const {
    if (is_wall(p) || is_target(p)) return false;
    const bool vertical = is_wall(neighbor(p, Action::Up)) || is_wall(neighbor(p, Action::Down));
    const bool horizontal = is_wall(neighbor(p, Action::Left)) || is_wall(neighbor(p, Action::Right));
    return vertical && horizontal;
}

std::vector<Pos> Grid::walls() const {
    std::vector<Pos> out;
    for (int i = 0; i < cell_count(); ++i) {
        if (cells_[i] & kWall) out.push_back(pos(i));
    }
    return out;
}

bool Grid::operator==(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_ && cells_ == other.cells_;
}

// ---------------------------------------------------------------------------
// State

bool SokobanState::has_box(Pos p) const {
    return std::binary_search(boxes.begin(), boxes.end(), p);
}

bool SokobanState::solved() const {
    return std::all_of(boxes.begin(), boxes.end(), [&](Pos b) { return grid->is_target(b); });
}

bool SokobanState::operator==(const SokobanState& other) const {
    const bool same_grid = grid == other.grid || (grid && other.grid && *grid == *other.grid);
    return same_grid && boxes == other.boxes && player == other.player && steps_taken == other.steps_taken;
}

SokobanState make_state(std::shared_ptr<const Grid> grid, std::vector<Pos> boxes, Pos player, int steps_taken) {
    if (!grid) throw std::invalid_argument("state needs a grid");
    std::sort(boxes.begin(), boxes.end());
    if (std::adjacent_find(boxes.begin(), boxes.end()) != boxes.end()) {
        throw std::invalid_argument("two boxes share a cell");
    }
    for (Pos b : boxes) {
        if (grid->is_wall(b)) throw std::invalid_argument("box on a wall");
    }
    if (grid->is_wall(player)) throw std::invalid_argument("player on a wall");
    if (std::binary_search(boxes.begin(), boxes.end(), player)) throw std::invalid_argument("player on a box");
    if (steps_taken < 0) throw std::invalid_argument("negative step count");
    return SokobanState{std::move(grid), std::move(boxes), player, steps_taken};
}

// ---------------------------------------------------------------------------
// Dynamics

namespace {

void check_can_step(const SokobanState& state, int max_steps) {
    if (state.solved()) throw std::invalid_argument("step on a solved state");
    if (state.steps_taken >= max_steps) throw std::invalid_argument("step budget exhausted");
}

}  // namespace

StepOutcome step(const SokobanState& state, Action action, const RewardSchedule& schedule, int max_steps) {
    check_can_step(state, max_steps);
    const Grid& grid = *state.grid;

    StepOutcome out{state};
    out.next_state.steps_taken = state.steps_taken + 1;
    out.reward = schedule.move_penalty;

    const Pos dest = neighbor(state.player, action);
    if (grid.is_wall(dest)) {
        // blocked
    } else if (!state.has_box(dest)) {
        out.next_state.player = dest;
        out.moved = true;
    } else {
        const Pos beyond = neighbor(dest, action);
        if (!grid.is_wall(beyond) && !state.has_box(beyond)) {
            auto& boxes = out.next_state.boxes;
            *std::find(boxes.begin(), boxes.end(), dest) = beyond;
            std::sort(boxes.begin(), boxes.end());
            out.next_state.player = dest;
            out.moved = true;
            const bool was_on = grid.is_target(dest);
            const bool now_on = grid.is_target(beyond);
            if (!was_on && now_on) out.reward += schedule.box_on_target;
            if (was_on && !now_on) out.reward += schedule.box_off_target;
        }
    }

    out.success = out.next_state.solved();
    if (out.success) out.reward += schedule.all_placed_bonus;
    out.terminated = out.success || out.next_state.steps_taken >= max_steps;
    return out;
}

StepOutcome idle_step(const SokobanState& state, const RewardSchedule& schedule, int max_steps) {
    check_can_step(state, max_steps);
    StepOutcome out{state};
    out.next_state.steps_taken = state.steps_taken + 1;
    out.reward = schedule.move_penalty;
    out.terminated = out.next_state.steps_taken >= max_steps;
    return out;
}

bool replay_solves(const SokobanState& state, const std::vector<Action>& actions, int max_steps) {
    if (actions.empty()) return state.solved();
    SokobanState cur = state;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (cur.solved() || cur.steps_taken >= max_steps) return false;
        auto out = step(cur, actions[i], {}, max_steps);
        if (out.success) return i + 1 == actions.size();
        cur = std::move(out.next_state);
    }
    return false;
}

// ---------------------------------------------------------------------------
// Text rendering

std::string render(const SokobanState& state, const SymbolTable& symbols) {
    const Grid& grid = *state.grid;
    std::string out;
    for (int r = 0; r < grid.height(); ++r) {
        if (r > 0) out += '\n';
        for (int c = 0; c < grid.width(); ++c) {
            const Pos p{r, c};
            const bool target = grid.is_target(p);
            if (p == state.player) {
                out += target ? symbols.player_on_target : symbols.player;
            } else if (state.has_box(p)) {
                out += target ? symbols.box_on_target : symbols.box;
            } else if (target) {
                out += symbols.target;
            } else if (grid.is_wall(p)) {
                out += symbols.wall;
            } else {
                out += symbols.floor;
            }
        }
    }
    return out;
}

SokobanState parse_observation(std::string_view text, const SymbolTable& symbols) {
    enum class Cell { Wall, Floor, Target, Box, Player, BoxOnTarget, PlayerOnTarget };
    std::vector<std::pair<std::string_view, Cell>> table{
        {symbols.wall, Cell::Wall},           {symbols.floor, Cell::Floor},
        {symbols.target, Cell::Target},       {symbols.box, Cell::Box},
        {symbols.player, Cell::Player},       {symbols.box_on_target, Cell::BoxOnTarget},
        {symbols.player_on_target, Cell::PlayerOnTarget},
    };
    // Longest symbol first so multi-byte glyphs win over any prefix.
    std::stable_sort(table.begin(), table.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.remove_suffix(1);

    std::vector<Pos> walls, targets, boxes;
    std::optional<Pos> player;
    int width = -1;
    int row = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        int col = 0;
        std::size_t i = 0;
        while (i < line.size()) {
            auto it = std::find_if(table.begin(), table.end(),
                                   [&](const auto& entry) { return line.substr(i).starts_with(entry.first); });
            if (it == table.end()) {
                throw std::invalid_argument("unknown symbol at row " + std::to_string(row) + ", col " +
                                            std::to_string(col));
            }
            const Pos p{row, col};
            switch (it->second) {
                case Cell::Wall: walls.push_back(p); break;
                case Cell::Floor: break;
                case Cell::Target: targets.push_back(p); break;
                case Cell::Box: boxes.push_back(p); break;
                case Cell::BoxOnTarget:
                    boxes.push_back(p);
                    targets.push_back(p);
                    break;
                case Cell::PlayerOnTarget: targets.push_back(p); [[fallthrough]];
                case Cell::Player:
                    if (player) throw std::invalid_argument("more than one player");
                    player = p;
                    break;
            }
            i += it->first.size();
            ++col;
        }
        if (width < 0) width = col;
        if (col != width) throw std::invalid_argument("ragged observation at row " + std::to_string(row));
        ++row;
        start = end + 1;
    }
    if (!player) throw std::invalid_argument("observation has no player");
    auto grid = std::make_shared<const Grid>(width, row, walls, targets);
    return make_state(std::move(grid), std::move(boxes), *player);
}

// ---------------------------------------------------------------------------
// Breadth-first search

namespace {

/// Index-level view of a state used inside the search.
struct Packed {
    int player;
    std::vector<int> boxes;  // sorted cell indices
};

struct PackedKeyU64 {
    using Key = std::uint64_t;
    using Hash = std::hash<std::uint64_t>;
    static Key encode(const Packed& s) {
        Key k = static_cast<Key>(s.player);
        for (int b : s.boxes) k = (k << 8) | static_cast<Key>(b);
        return k;
    }
    static Packed decode(Key k, std::size_t num_boxes) {
        Packed s;
        s.boxes.resize(num_boxes);
        for (std::size_t i = num_boxes; i-- > 0;) {
            s.boxes[i] = static_cast<int>(k & 0xFF);
            k >>= 8;
        }
        s.player = static_cast<int>(k);
        return s;
    }
};

struct PackedKeyWide {
    using Key = std::vector<int>;
    struct Hash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t h = 0xCBF29CE484222325ULL;
            for (int v : k) h = mix_seed(h ^ static_cast<std::uint64_t>(v));
            return static_cast<std::size_t>(h);
        }
    };
    static Key encode(const Packed& s) {
        Key k{s.player};
        k.insert(k.end(), s.boxes.begin(), s.boxes.end());
        return k;
    }
    static Packed decode(const Key& k, std::size_t) {
        return Packed{k.front(), std::vector<int>(k.begin() + 1, k.end())};
    }
};

template <typename Codec>
std::optional<std::vector<Action>> bfs(const SokobanState& start, const SolveOptions& options) {
    using Key = typename Codec::Key;
    const Grid& grid = *start.grid;
    const std::size_t num_boxes = start.boxes.size();

    std::vector<char> wall(grid.cell_count()), target(grid.cell_count()), dead(grid.cell_count());
    for (int i = 0; i < grid.cell_count(); ++i) {
        wall[i] = grid.is_wall(grid.pos(i));
        target[i] = grid.is_target(grid.pos(i));
        dead[i] = options.prune_dead_corners && grid.is_dead_corner(grid.pos(i));
    }
    const std::array<int, 4> delta{-grid.width(), 1, grid.width(), -1};

    struct Node {
        Key key;
        std::int32_t parent;
        Action action;
    };
    std::vector<Node> nodes;
    std::unordered_set<Key, typename Codec::Hash> seen;

    Packed root{grid.index(start.player), {}};
    for (Pos b : start.boxes) root.boxes.push_back(grid.index(b));
    std::sort(root.boxes.begin(), root.boxes.end());

    auto is_solved = [&](const Packed& s) {
        return std::all_of(s.boxes.begin(), s.boxes.end(), [&](int b) { return target[b] != 0; });
    };
    auto trace = [&](std::int32_t idx) {
        std::vector<Action> path;
        for (; nodes[idx].parent >= 0; idx = nodes[idx].parent) path.push_back(nodes[idx].action);
        std::reverse(path.begin(), path.end());
        return path;
    };

    if (is_solved(root)) return std::vector<Action>{};
    const int budget = options.max_steps - start.steps_taken;
    if (budget <= 0) return std::nullopt;

    nodes.push_back({Codec::encode(root), -1, Action::Up});
    seen.insert(nodes.back().key);

    std::size_t level_begin = 0;
    for (int depth = 0; depth < budget; ++depth) {
        const std::size_t level_end = nodes.size();
        if (level_begin == level_end) break;
        for (std::size_t n = level_begin; n < level_end; ++n) {
            const Packed cur = Codec::decode(nodes[n].key, num_boxes);
            for (Action a : kActions) {
                const int d = delta[static_cast<std::size_t>(a)];
                const int dest = cur.player + d;
                if (wall[dest]) continue;
                Packed next = cur;
                next.player = dest;
                auto box = std::find(next.boxes.begin(), next.boxes.end(), dest);
                if (box != next.boxes.end()) {
                    const int beyond = dest + d;
                    if (wall[beyond] || std::find(next.boxes.begin(), next.boxes.end(), beyond) != next.boxes.end()) {
                        continue;
                    }
                    if (dead[beyond]) continue;
                    *box = beyond;
                    std::sort(next.boxes.begin(), next.boxes.end());
                }
                Key key = Codec::encode(next);
                if (!seen.insert(key).second) continue;
                nodes.push_back({std::move(key), static_cast<std::int32_t>(n), a});
                if (is_solved(next)) return trace(static_cast<std::int32_t>(nodes.size() - 1));
            }
        }
        level_begin = level_end;
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::vector<Action>> solve_bfs(const SokobanState& state, const SolveOptions& options) {
    if (state.grid->cell_count() <= 256 && state.boxes.size() <= 7) return bfs<PackedKeyU64>(state, options);
    return bfs<PackedKeyWide>(state, options);
}

// ---------------------------------------------------------------------------
// Generation

Puzzle generate_puzzle(const PuzzleSpec& spec) {
    if (spec.num_boxes < 1 || spec.num_boxes > 2) throw std::invalid_argument("num_boxes must be 1 or 2");
    if (spec.width < 3 || spec.height < 3) throw std::invalid_argument("grid too small");
    const int interior = (spec.width - 2) * (spec.height - 2);
    if (interior < 2 * spec.num_boxes + 1) throw std::invalid_argument("grid too small for the requested boxes");

    Rng rng(spec.seed);
    for (int attempt = 1; attempt <= spec.attempt_budget; ++attempt) {
        std::vector<Pos> walls;
        std::vector<Pos> free;
        for (int r = 0; r < spec.height; ++r) {
            for (int c = 0; c < spec.width; ++c) {
                const bool border = r == 0 || c == 0 || r == spec.height - 1 || c == spec.width - 1;
                if (border || uniform_unit(rng) < spec.wall_density) {
                    walls.push_back({r, c});
                } else {
                    free.push_back({r, c});
                }
            }
        }
        if (static_cast<int>(free.size()) < 2 * spec.num_boxes + 1) continue;
        shuffle(rng, std::span<Pos>(free));
        const auto n = static_cast<std::size_t>(spec.num_boxes);
        std::vector<Pos> targets(free.begin(), free.begin() + n);
        std::vector<Pos> boxes(free.begin() + n, free.begin() + 2 * n);
        const Pos player = free[2 * n];

        auto grid = std::make_shared<const Grid>(spec.width, spec.height, walls, targets);
        if (std::any_of(boxes.begin(), boxes.end(), [&](Pos b) { return grid->is_dead_corner(b); })) continue;

        SokobanState state = make_state(std::move(grid), std::move(boxes), player);
        auto solution = solve_bfs(state, {spec.max_steps, true});
        if (solution && !solution->empty()) return Puzzle{std::move(state), std::move(*solution), attempt};
    }
    throw GenerationExhausted("no solvable puzzle within " + std::to_string(spec.attempt_budget) + " attempts");
}

}  // namespace taskbench::sokoban
