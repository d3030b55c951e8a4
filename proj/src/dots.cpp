#include "dqd/dots.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "dqd/errors.hpp"

namespace dqd {

const Dot* DotRegions::left() const {
    for (const auto& d : dots)
        if (d.side == DotSide::Left) return &d;
    return nullptr;
}

const Dot* DotRegions::right() const {
    for (const auto& d : dots)
        if (d.side == DotSide::Right) return &d;
    return nullptr;
}

int DotRegions::n_left() const { return left() ? left()->occupation : 0; }
int DotRegions::n_right() const { return right() ? right()->occupation : 0; }

std::vector<double> well_profile(const Grid& g, const Eigen::VectorXd& band_edge) {
    if (band_edge.size() != g.size()) throw ConfigError("band edge does not match the grid");
    std::vector<double> p(g.nx, std::numeric_limits<double>::infinity());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int c = g.index(i, j);
            if (g.region[c] == Region::Quantum) p[i] = std::min(p[i], band_edge[c]);
        }
    for (double v : p)
        if (!std::isfinite(v)) throw ConfigError("every grid column needs Quantum-region cells to locate dots");
    return p;
}

namespace {

struct Valley {
    int column;
    double value;
    double prominence;
};

// Interior local minima (plateaus count once, at their centre) with their topographic
// prominence: the smaller of the highest points crossed on either side before reaching lower
// ground or the domain edge.
std::vector<Valley> valleys(const std::vector<double>& p) {
    const int n = static_cast<int>(p.size());
    std::vector<Valley> out;
    int a = 1;
    while (a < n - 1) {
        int b = a;
        while (b + 1 < n && p[b + 1] == p[a]) ++b;
        if (b < n - 1 && p[a - 1] > p[a] && p[b + 1] > p[b]) {
            double left = p[a], right = p[a];
            for (int k = a - 1; k >= 0 && p[k] >= p[a]; --k) left = std::max(left, p[k]);
            for (int k = b + 1; k < n && p[k] >= p[a]; ++k) right = std::max(right, p[k]);
            out.push_back({(a + b) / 2, p[a], std::min(left, right) - p[a]});
        }
        a = b + 1;
    }
    return out;
}

}  // namespace

DotRegions find_dots(const Grid& g, const Eigen::VectorXd& band_edge, const Spectrum& spectrum,
                     double fermi_level_ev, double m_gate_centre_nm, const DotOptions& opts) {
    const auto profile = well_profile(g, band_edge);
    std::vector<Valley> found;
    for (const auto& v : valleys(profile))
        if (v.prominence >= opts.min_prominence_ev) found.push_back(v);
    if (found.size() > 2) {
        std::ostringstream msg;
        msg << found.size() << " potential valleys along the well (at x =";
        for (const auto& v : found) msg << ' ' << g.x(v.column);
        msg << " nm); at most two dots are supported";
        throw ModelError(msg.str());
    }

    DotRegions r;
    for (const auto& v : found) {
        Dot d;
        d.minimum_column = v.column;
        d.minimum_x_nm = g.x(v.column);
        d.minimum_ev = v.value;
        d.prominence_ev = v.prominence;
        r.dots.push_back(d);
    }
    if (r.dots.size() == 2) {
        r.dots[0].side = DotSide::Left;
        r.dots[1].side = DotSide::Right;
        const auto first = profile.begin() + r.dots[0].minimum_column;
        const auto last = profile.begin() + r.dots[1].minimum_column + 1;
        r.barrier_column = static_cast<int>(std::max_element(first, last) - profile.begin());
        r.barrier_x_nm = g.x(r.barrier_column);
        r.barrier_ev = profile[r.barrier_column];
    } else if (r.dots.size() == 1) {
        r.dots[0].side = r.dots[0].minimum_x_nm < m_gate_centre_nm ? DotSide::Left : DotSide::Right;
    }

    const double area = g.cell_area();
    for (int s = 0; s < spectrum.n_states(); ++s) {
        const auto& psi = spectrum.wavefunctions[s];
        double cx = 0.0, left = 0.0;
        for (int c = 0; c < g.size(); ++c) {
            const double w = psi[c] * psi[c] * area;
            if (w == 0.0) continue;
            const int i = c % g.nx;
            cx += g.x(i) * w;
            if (r.barrier_column >= 0) left += i < r.barrier_column ? w : (i == r.barrier_column ? 0.5 * w : 0.0);
        }
        r.centroid_x_nm.push_back(cx);
        int dot = -1;
        if (r.dots.size() == 2) {
            r.left_mass.push_back(left);
            const bool straddles = std::abs(cx - r.barrier_x_nm) <= g.dx;
            const bool is_left = straddles ? left > 0.5 : cx < r.barrier_x_nm;
            dot = is_left ? 0 : 1;
        } else {
            r.left_mass.push_back(!r.dots.empty() && r.dots[0].side == DotSide::Left ? 1.0 : 0.0);
            if (r.dots.size() == 1) dot = 0;
        }
        r.orbital_dot.push_back(dot);
        if (dot >= 0) r.dots[dot].orbitals.push_back(s);
    }

    // Occupations: states below E_F, split between the dots by their probability on each side.
    // Near resonance the bonding and antibonding states straddle the barrier; summing the
    // weights keeps (1,1) from being reported as (0,2).
    int occupied = 0;
    double left_weight = 0.0;
    for (int s = 0; s < spectrum.n_states(); ++s)
        if (spectrum.energies[s] < fermi_level_ev) {
            ++occupied;
            left_weight += r.left_mass[s];
        }
    if (r.dots.size() == 2) {
        r.dots[0].occupation = static_cast<int>(std::floor(left_weight + 0.5));
        r.dots[1].occupation = occupied - r.dots[0].occupation;
    } else if (r.dots.size() == 1) {
        r.dots[0].occupation = occupied;
    }
    return r;
}

LocalizedPair localize_pair(const Grid& g, const Spectrum& spectrum, const DotRegions& dots) {
    if (dots.dots.size() != 2) throw ModelError("exchange needs two dots");
    const int n = spectrum.n_states();
    // Left-of-barrier projector (the barrier column counts half) in the basis of all states.
    const double area = g.cell_area();
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(g.size());
    for (int c = 0; c < g.size(); ++c) {
        const int i = c % g.nx;
        weight[c] = i < dots.barrier_column ? area : (i == dots.barrier_column ? 0.5 * area : 0.0);
    }
    Eigen::MatrixXd proj(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b)
            proj(a, b) = proj(b, a) = spectrum.wavefunctions[a].dot(weight.cwiseProduct(spectrum.wavefunctions[b]));

    // Lowest-energy pair of states whose span holds one left- and one right-localized orbital.
    constexpr double kLeak = 0.1;
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
    std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& x, const auto& y) {
        return spectrum.energies[x.first] + spectrum.energies[x.second] <
               spectrum.energies[y.first] + spectrum.energies[y.second];
    });
    for (const auto& [ia, ib] : pairs) {
        Eigen::Matrix2d p;
        p << proj(ia, ia), proj(ia, ib), proj(ia, ib), proj(ib, ib);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(p);
        if (es.eigenvalues()[1] < 1.0 - kLeak || es.eigenvalues()[0] > kLeak) continue;
        Eigen::Vector2d cl = es.eigenvectors().col(1);  // largest left weight
        Eigen::Vector2d cr = es.eigenvectors().col(0);
        if (cl[0] + cl[1] < 0.0) cl = -cl;  // deterministic signs
        if (cr[0] + cr[1] < 0.0) cr = -cr;
        const double ea = spectrum.energies[ia], eb = spectrum.energies[ib];
        LocalizedPair out;
        out.left = cl[0] * spectrum.wavefunctions[ia] + cl[1] * spectrum.wavefunctions[ib];
        out.right = cr[0] * spectrum.wavefunctions[ia] + cr[1] * spectrum.wavefunctions[ib];
        out.eps_left = cl[0] * cl[0] * ea + cl[1] * cl[1] * eb;
        out.eps_right = cr[0] * cr[0] * ea + cr[1] * cr[1] * eb;
        out.tunnel = std::abs(cl[0] * cr[0] * ea + cl[1] * cr[1] * eb);
        out.states = {ia, ib};
        return out;
    }
    throw ModelError("no pair of states localizes into the left and the right dot");
}

DotRegions find_dots(const ConvergedSolution& s, const DotOptions& opts) {
    const auto& m = s.spec.electrode("M");
    return find_dots(s.grid, s.band_edge(), s.spectrum, s.materials.fermi_level_ev, 0.5 * (m.start_nm + m.end_nm),
                     opts);
}

// ---------------------------------------------------------------------------------------------
// Charge stability

namespace {

std::vector<double> axis(double lo, double hi, double step, const char* name) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(step))
        throw ConfigError(std::string(name) + " range must be finite");
    if (!(step > 0.0)) throw ConfigError(std::string(name) + " step must be positive");
    if (hi < lo) throw ConfigError(std::string(name) + " range is empty");
    const long n = std::lround(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (n > 100000) throw ConfigError(std::string(name) + " range has too many points");
    std::vector<double> v(n);
    for (long k = 0; k < n; ++k) v[k] = lo + k * step;
    return v;
}

}  // namespace

std::vector<double> StabilityWindow::v_l_values() const { return axis(v_l_min, v_l_max, v_l_step, "V_L"); }
std::vector<double> StabilityWindow::v_r_values() const { return axis(v_r_min, v_r_max, v_r_step, "V_R"); }

std::vector<std::pair<int, int>> StabilityDiagram::regimes() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t k = 0; k < n_l.size(); ++k) out.emplace_back(n_l[k], n_r[k]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

StabilityDiagram charge_stability(const DeviceSpec& spec, const MaterialParams& mat, const StabilityWindow& w,
                                  const ScfOptions& opts, int threads, const DotOptions& dot_opts) {
    StabilityDiagram d;
    d.v_l = w.v_l_values();
    d.v_r = w.v_r_values();
    const int cols = static_cast<int>(d.v_l.size());
    const int rows = static_cast<int>(d.v_r.size());
    d.n_l.assign(static_cast<std::size_t>(rows) * cols, 0);
    d.n_r.assign(static_cast<std::size_t>(rows) * cols, 0);
    spec.validate();

    std::vector<std::exception_ptr> failures(rows);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int row = next++; row < rows; row = next++) {
            try {
                ScfOptions o = opts;
                for (int col = 0; col < cols; ++col) {
                    DeviceBiases b;
                    b.v_b = w.v_b;
                    b.v_l = d.v_l[col];
                    b.v_r = d.v_r[row];
                    b.v_m = w.v_m;
                    b.drain = w.drain;
                    ConvergedSolution s;
                    try {
                        s = self_consistent_solve(spec, mat, b, o);
                    } catch (const NumericalError& e) {
                        std::ostringstream msg;
                        msg << "bias point V_L = " << b.v_l << " V, V_R = " << b.v_r << " V: " << e.what();
                        throw NumericalError(msg.str(), e.history());
                    }
                    const DotRegions dots = find_dots(s, dot_opts);
                    d.n_l[static_cast<std::size_t>(row) * cols + col] = dots.n_left();
                    d.n_r[static_cast<std::size_t>(row) * cols + col] = dots.n_right();
                    o.initial_potential = s.potential.values;
                }
            } catch (...) {
                failures[row] = std::current_exception();
            }
        }
    };
    const int n_workers = std::max(1, std::min(threads, rows));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);

    d.boundaries = stability_boundaries(d);
    return d;
}

std::vector<StabilityBoundary> stability_boundaries(const StabilityDiagram& d) {
    const int cols = static_cast<int>(d.v_l.size());
    const int rows = static_cast<int>(d.v_r.size());
    std::map<std::string, StabilityBoundary> lines;
    auto add = [&](const std::string& dot, int from, int to, double vl, double vr) {
        const std::string label = dot + ' ' + std::to_string(from) + "->" + std::to_string(to);
        auto& line = lines[label];
        line.label = label;
        line.points.emplace_back(vl, vr);
    };
    // n_L transitions along V_L (one point per row), n_R transitions along V_R (one per column).
    for (int row = 0; row < rows; ++row)
        for (int col = 0; col + 1 < cols; ++col)
            if (d.left_at(row, col) != d.left_at(row, col + 1))
                add("n_L", d.left_at(row, col), d.left_at(row, col + 1), 0.5 * (d.v_l[col] + d.v_l[col + 1]),
                    d.v_r[row]);
    for (int col = 0; col < cols; ++col)
        for (int row = 0; row + 1 < rows; ++row)
            if (d.right_at(row, col) != d.right_at(row + 1, col))
                add("n_R", d.right_at(row, col), d.right_at(row + 1, col), d.v_l[col],
                    0.5 * (d.v_r[row] + d.v_r[row + 1]));
    std::vector<StabilityBoundary> out;
    for (auto& [label, line] : lines) out.push_back(std::move(line));
    return out;
}

void write_stability_csv(std::ostream& os, const StabilityDiagram& d) {
    os << "V_L,V_R,n_L,n_R\n";
    const auto old = os.precision(10);
    for (std::size_t row = 0; row < d.v_r.size(); ++row)
        for (std::size_t col = 0; col < d.v_l.size(); ++col)
            os << d.v_l[col] << ',' << d.v_r[row] << ',' << d.left_at(static_cast<int>(row), static_cast<int>(col))
               << ',' << d.right_at(static_cast<int>(row), static_cast<int>(col)) << '\n';
    os.precision(old);
}

}  // namespace dqd
