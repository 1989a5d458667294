#include "clickbait/transport.hpp"

#include "clickbait/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace clickbait::transport {

namespace {

struct Cell {
    std::size_t row;
    std::size_t col;
    double flow;
};

void check_inputs(std::span<const double> supply, std::span<const double> demand, const CostMatrix& cost) {
    if (supply.empty() || demand.empty()) {
        throw ValidationError("transport", "supply and demand must be non-empty");
    }
    if (cost.rows != supply.size() || cost.cols != demand.size()) {
        throw ValidationError("transport", "cost matrix shape does not match supply/demand");
    }
    auto bad = [](double x) { return !std::isfinite(x) || x < 0.0; };
    if (std::any_of(supply.begin(), supply.end(), bad) || std::any_of(demand.begin(), demand.end(), bad)) {
        throw ValidationError("transport", "supplies and demands must be finite and non-negative");
    }
    if (std::any_of(cost.values.begin(), cost.values.end(), [](double c) { return !std::isfinite(c); })) {
        throw ValidationError("transport", "costs must be finite");
    }
    const double s = std::accumulate(supply.begin(), supply.end(), 0.0);
    const double d = std::accumulate(demand.begin(), demand.end(), 0.0);
    if (std::abs(s - d) > 1e-9 * std::max({1.0, s, d})) {
        throw ValidationError("transport", "total supply and total demand differ");
    }
}

// Matrix-minimum rule. Each allocation retires exactly one row or column
// (both only on the very last), which yields m+n-1 cells forming a spanning
// tree even when allocations are zero.
std::vector<Cell> initial_basis(std::span<const double> supply, std::span<const double> demand,
                                const CostMatrix& cost) {
    const std::size_t m = supply.size();
    const std::size_t n = demand.size();
    std::vector<double> s(supply.begin(), supply.end());
    std::vector<double> d(demand.begin(), demand.end());
    const double total = std::accumulate(s.begin(), s.end(), 0.0);
    const double tie_tol = 1e-12 * std::max(1.0, total);

    std::vector<std::size_t> order(m * n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cost.values[a] < cost.values[b]; });

    std::vector<char> row_open(m, 1);
    std::vector<char> col_open(n, 1);
    std::size_t rows_left = m;
    std::size_t cols_left = n;
    std::vector<Cell> basis;
    basis.reserve(m + n - 1);

    for (std::size_t k : order) {
        if (rows_left == 0 || cols_left == 0) {
            break;
        }
        const std::size_t i = k / n;
        const std::size_t j = k % n;
        if (!row_open[i] || !col_open[j]) {
            continue;
        }
        if (rows_left == 1 && cols_left == 1) {
            basis.push_back({i, j, std::max(0.0, std::min(s[i], d[j]))});
            rows_left = cols_left = 0;
            break;
        }
        const double x = std::min(s[i], d[j]);
        basis.push_back({i, j, std::max(0.0, x)});
        const bool tie = std::abs(s[i] - d[j]) <= tie_tol;
        bool close_row = tie ? rows_left > 1 : s[i] < d[j];
        if (close_row && rows_left == 1) {
            close_row = false;
        } else if (!close_row && cols_left == 1) {
            close_row = true;
        }
        if (close_row) {
            d[j] = std::max(0.0, d[j] - s[i]);
            s[i] = 0.0;
            row_open[i] = 0;
            --rows_left;
        } else {
            s[i] = std::max(0.0, s[i] - d[j]);
            d[j] = 0.0;
            col_open[j] = 0;
            --cols_left;
        }
    }
    return basis;
}

class Simplex {
public:
    Simplex(std::size_t m, std::size_t n, const CostMatrix& cost, std::vector<Cell> basis)
        : m_(m), n_(n), cost_(cost), basis_(std::move(basis)), adj_(m + n), u_(m), v_(n),
          seen_(m + n), via_(m + n) {
        for (std::size_t b = 0; b < basis_.size(); ++b) {
            link(b);
        }
        double max_cost = 0.0;
        for (double c : cost_.values) {
            max_cost = std::max(max_cost, std::abs(c));
        }
        price_tol_ = 1e-12 * std::max(1.0, max_cost);
    }

    std::size_t run() {
        const std::size_t degenerate_limit = 50 + m_ + n_;
        std::size_t degenerate_run = 0;
        bool bland = false;
        std::size_t iterations = 0;
        while (true) {
            compute_potentials();
            std::size_t ei = 0;
            std::size_t ej = 0;
            if (!select_entering(bland, ei, ej)) {
                return iterations;
            }
            const double theta = pivot(ei, ej, bland);
            ++iterations;
            if (theta <= 0.0) {
                if (++degenerate_run > degenerate_limit) {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
    }

    const std::vector<Cell>& basis() const { return basis_; }

private:
    std::size_t col_node(std::size_t j) const { return m_ + j; }

    void link(std::size_t b) {
        adj_[basis_[b].row].push_back(b);
        adj_[col_node(basis_[b].col)].push_back(b);
    }

    void unlink(std::size_t b) {
        for (std::size_t node : {basis_[b].row, col_node(basis_[b].col)}) {
            auto& list = adj_[node];
            list.erase(std::find(list.begin(), list.end(), b));
        }
    }

    std::size_t other_end(std::size_t b, std::size_t node) const {
        return node < m_ ? col_node(basis_[b].col) : basis_[b].row;
    }

    void compute_potentials() {
        std::fill(seen_.begin(), seen_.end(), 0);
        stack_.clear();
        u_[0] = 0.0;
        seen_[0] = 1;
        stack_.push_back(0);
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            for (std::size_t b : adj_[node]) {
                const std::size_t next = other_end(b, node);
                if (seen_[next]) {
                    continue;
                }
                seen_[next] = 1;
                const double c = cost_(basis_[b].row, basis_[b].col);
                if (next < m_) {
                    u_[next] = c - v_[basis_[b].col];
                } else {
                    v_[next - m_] = c - u_[basis_[b].row];
                }
                stack_.push_back(next);
            }
        }
    }

    bool select_entering(bool bland, std::size_t& ei, std::size_t& ej) const {
        double best = -price_tol_;
        bool found = false;
        for (std::size_t i = 0; i < m_; ++i) {
            const double* row = &cost_.values[i * n_];
            const double ui = u_[i];
            for (std::size_t j = 0; j < n_; ++j) {
                const double reduced = row[j] - ui - v_[j];
                if (reduced < best) {
                    ei = i;
                    ej = j;
                    found = true;
                    if (bland) {
                        return true;
                    }
                    best = reduced;
                }
            }
        }
        return found;
    }

    // Tree path from row node `ei` to column node `ej`, as basis indices
    // ordered from the column end.
    void find_path(std::size_t ei, std::size_t ej) {
        std::fill(seen_.begin(), seen_.end(), 0);
        stack_.clear();
        seen_[ei] = 1;
        stack_.push_back(ei);
        const std::size_t target = col_node(ej);
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            if (node == target) {
                break;
            }
            for (std::size_t b : adj_[node]) {
                const std::size_t next = other_end(b, node);
                if (!seen_[next]) {
                    seen_[next] = 1;
                    via_[next] = b;
                    stack_.push_back(next);
                }
            }
        }
        path_.clear();
        for (std::size_t node = target; node != ei;) {
            const std::size_t b = via_[node];
            path_.push_back(b);
            node = other_end(b, node);
        }
    }

    double pivot(std::size_t ei, std::size_t ej, bool bland) {
        find_path(ei, ej);
        // path_[0] touches column ej and loses flow; signs alternate from there.
        std::size_t leave = path_.size();
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < path_.size(); k += 2) {
            const Cell& c = basis_[path_[k]];
            bool better = c.flow < theta;
            if (bland && leave < path_.size() && c.flow == theta) {
                const Cell& cur = basis_[path_[leave]];
                better = std::tie(c.row, c.col) < std::tie(cur.row, cur.col);
            }
            if (better) {
                theta = c.flow;
                leave = k;
            }
        }
        for (std::size_t k = 0; k < path_.size(); ++k) {
            Cell& c = basis_[path_[k]];
            c.flow = k % 2 == 0 ? std::max(0.0, c.flow - theta) : c.flow + theta;
        }
        const std::size_t slot = path_[leave];
        unlink(slot);
        basis_[slot] = {ei, ej, theta};
        link(slot);
        return theta;
    }

    std::size_t m_;
    std::size_t n_;
    const CostMatrix& cost_;
    std::vector<Cell> basis_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<double> u_;
    std::vector<double> v_;
    std::vector<char> seen_;
    std::vector<std::size_t> via_;
    std::vector<std::size_t> stack_;
    std::vector<std::size_t> path_;
    double price_tol_ = 0.0;
};

} // namespace

Solution solve(std::span<const double> supply, std::span<const double> demand, const CostMatrix& cost) {
    check_inputs(supply, demand, cost);
    Simplex simplex(supply.size(), demand.size(), cost, initial_basis(supply, demand, cost));
    Solution sol;
    sol.iterations = simplex.run();
    sol.plan.reserve(simplex.basis().size());
    for (const auto& c : simplex.basis()) {
        sol.plan.push_back({c.row, c.col, c.flow});
        sol.cost += c.flow * cost(c.row, c.col);
    }
    return sol;
}

double greedy_upper_bound(std::span<const double> supply, std::span<const double> demand,
                          const CostMatrix& cost) {
    check_inputs(supply, demand, cost);
    double total = 0.0;
    for (const auto& c : initial_basis(supply, demand, cost)) {
        total += c.flow * cost(c.row, c.col);
    }
    return total;
}

} // namespace clickbait::transport
