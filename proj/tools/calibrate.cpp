// Calibration fixture: builds the gate layout from a few geometric parameters, evaluates the
// device anchors (occupation at the initialization point, J at two middle-gate biases, dot
// centroids) and fits the linear micromagnet map to the target Zeeman splittings.
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dqd/device_model.hpp"
#include "dqd/errors.hpp"
#include "dqd/units.hpp"

using namespace dqd;

namespace {

struct Layout {
    double centre = 200.0;  // lateral position of the M gate centre (nm)
    double w_m = 40.0, w_l = 60.0, w_r = 60.0, w_b = 50.0, gap = 10.0;
    double cap = 30.0;
    double phi = 0.45, d_phi_l = 0.0, d_phi_m = 0.0, d_phi_r = 0.0;
};

DeviceFile apply(DeviceFile f, const Layout& p) {
    auto set = [&](const std::string& name, double a, double b) {
        for (auto& e : f.spec.electrodes)
            if (e.name == name) {
                e.start_nm = a;
                e.end_nm = b;
            }
    };
    const double m0 = p.centre - 0.5 * p.w_m, m1 = p.centre + 0.5 * p.w_m;
    const double l1 = m0 - p.gap, l0 = l1 - p.w_l;
    const double r0 = m1 + p.gap, r1 = r0 + p.w_r;
    set("M", m0, m1);
    set("L", l0, l1);
    set("R", r0, r1);
    set("B1", l0 - p.gap - p.w_b, l0 - p.gap);
    set("B2", r1 + p.gap, r1 + p.gap + p.w_b);
    const double old_cap = f.spec.layers.front().thickness_nm;
    f.spec.layers.front().thickness_nm = p.cap;
    const double dy = f.spec.grid.dy_nm;
    f.spec.grid.ny += static_cast<int>(std::lround((p.cap - old_cap) / dy));
    f.spec.source_drain.top_nm += p.cap - old_cap;
    f.spec.source_drain.bottom_nm += p.cap - old_cap;
    f.materials.schottky_barrier_ev = p.phi;
    f.materials.electrode_barrier_offsets.clear();
    for (const auto& [name, d] : {std::pair<const char*, double>{"L", p.d_phi_l}, {"M", p.d_phi_m}, {"R", p.d_phi_r}})
        if (d != 0.0) f.materials.electrode_barrier_offsets.emplace_back(name, d);
    f.spec.validate();
    return f;
}

struct Point {
    double v_m = 0.0;
    int n_l = 0, n_r = 0;
    double e_l = NAN, e_r = NAN;  // lowest orbital of each dot (meV)
    double x_l = NAN, x_r = NAN;
    double barrier = NAN;
    double levels[4] = {NAN, NAN, NAN, NAN};
    double j = NAN, t = NAN, detuning = NAN, u = NAN, v = NAN;
    std::string error;
};

Point evaluate(const DeviceFile& f, double v_m) {
    Point pt;
    pt.v_m = v_m;
    DeviceBiases b = f.biases;
    b.v_m = v_m;
    try {
        const auto s = self_consistent_solve(f.spec, f.materials, b);
        const auto dots = find_dots(s);
        pt.n_l = dots.n_left();
        pt.n_r = dots.n_right();
        pt.barrier = dots.barrier_ev * 1e3;
        for (int k = 0; k < 4; ++k) pt.levels[k] = s.spectrum.energies[k] * 1e3;
        const LocalizedPair pair = localize_pair(s.grid, s.spectrum, dots);
        auto centroid = [&](const Eigen::VectorXd& psi) {
            double cx = 0.0;
            for (int c = 0; c < s.grid.size(); ++c) cx += s.grid.x(c % s.grid.nx) * psi[c] * psi[c];
            return cx * s.grid.cell_area();
        };
        pt.e_l = pair.eps_left * 1e3;
        pt.e_r = pair.eps_right * 1e3;
        pt.x_l = centroid(pair.left);
        pt.x_r = centroid(pair.right);
        const auto x = exchange_energy(s);
        pt.j = x.j_hz;
        pt.t = x.tunnel_ev;
        pt.detuning = x.detuning_ev;
        pt.u = x.u_ev;
        pt.v = x.v_ev;
    } catch (const std::exception& e) {
        pt.error = e.what();
    }
    return pt;
}

void print(const Point& p) {
    std::printf("V_M %.4f  (n_L,n_R)=(%d,%d)  E %.2f %.2f %.2f %.2f  E_L %.3f E_R %.3f meV  x_L %.2f x_R %.2f  Vb %.2f meV  t %.4g eV  eps %.4g  U %.4g V %.4g  J %.6g Hz %s\n",
                p.v_m, p.n_l, p.n_r, p.levels[0], p.levels[1], p.levels[2], p.levels[3], p.e_l, p.e_r, p.x_l, p.x_r, p.barrier, p.t, p.detuning, p.u, p.v, p.j, p.error.c_str());
    std::fflush(stdout);
}

// Damped Newton iteration on (dPhi_L, Phi_B, dPhi_M) for E_L = E_R = level and log J = log target,
// with a forward-difference Jacobian.
Layout fit_offsets(const DeviceFile& file, Layout p, double v_m, double level, double j_target) {
    auto residual = [&](const Layout& q) {
        const Point pt = evaluate(apply(file, q), v_m);
        print(pt);
        Eigen::Vector3d r;
        if (!pt.error.empty() || !std::isfinite(pt.j) || pt.j <= 0.0) {
            r << (std::isfinite(pt.e_l) ? pt.e_l - level : 5.0), (std::isfinite(pt.e_r) ? pt.e_r - level : 5.0), 5.0;
            return r;
        }
        r << pt.e_l - level, pt.e_r - level, std::log(pt.j / j_target);
        return r;
    };
    auto shifted = [](Layout q, int k, double d) {
        (k == 0 ? q.d_phi_l : k == 1 ? q.phi : q.d_phi_m) += d;
        return q;
    };
    constexpr double h = 2e-3;  // eV
    Eigen::Vector3d r = residual(p);
    for (int it = 0; it < 12; ++it) {
        std::printf("fit %d: dPhi_L %.5f Phi_B %.5f dPhi_M %.5f  |r| %.3g\n", it, p.d_phi_l, p.phi, p.d_phi_m, r.norm());
        if (std::abs(r[0]) < 0.05 && std::abs(r[1]) < 0.05 && std::abs(r[2]) < 0.02) break;
        Eigen::Matrix3d jac;
        for (int k = 0; k < 3; ++k) jac.col(k) = (residual(shifted(p, k, h)) - r) / h;
        Eigen::Vector3d step = -jac.colPivHouseholderQr().solve(r);
        const double big = step.cwiseAbs().maxCoeff();
        if (big > 0.02) step *= 0.02 / big;
        Layout next = p;
        for (int k = 0; k < 3; ++k) next = shifted(next, k, step[k]);
        Eigen::Vector3d r_next = residual(next);
        for (int bt = 0; bt < 4 && r_next.norm() > r.norm(); ++bt) {
            step *= 0.5;
            next = p;
            for (int k = 0; k < 3; ++k) next = shifted(next, k, step[k]);
            r_next = residual(next);
        }
        p = next;
        r = r_next;
    }
    std::printf("fitted: --d-phi-l %.6f --phi %.6f --d-phi-m %.6f\n", p.d_phi_l, p.phi, p.d_phi_m);
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibrate the default device layout and micromagnet map"};
    std::string base = "configs/device.json";
    std::string out_device, out_map;
    Layout p;
    std::vector<double> v_ms = {0.400, 0.408};
    double ezl_target = 18.309e9, ezr_target = 18.453e9;
    app.add_option("--base", base, "device file providing the stack, grid and biases");
    app.add_option("--centre", p.centre);
    app.add_option("--w-m", p.w_m);
    app.add_option("--w-l", p.w_l);
    app.add_option("--w-r", p.w_r);
    app.add_option("--w-b", p.w_b);
    app.add_option("--gap", p.gap);
    app.add_option("--cap", p.cap);
    app.add_option("--phi", p.phi);
    app.add_option("--d-phi-l", p.d_phi_l);
    app.add_option("--d-phi-m", p.d_phi_m);
    app.add_option("--d-phi-r", p.d_phi_r);
    app.add_option("--v-m", v_ms, "middle-gate biases to evaluate (V)");
    app.add_option("--write-device", out_device, "write the calibrated device file here");
    app.add_option("--write-map", out_map, "write the fitted field map here");
    bool fit = false;
    double level_target_mev = -1.0, j_target = 75.6e3;
    app.add_flag("--fit", fit, "adjust the L and M barrier offsets and the common barrier to place both ground levels and J at V_M[0]");
    app.add_option("--level", level_target_mev, "target ground level of both dots (meV from E_F)");
    app.add_option("--j", j_target, "target J at the first V_M (Hz)");
    CLI11_PARSE(app, argc, argv);

    try {
        const DeviceFile file = load_device_file(base);
        if (fit) p = fit_offsets(file, p, v_ms.front(), level_target_mev, j_target);
        const DeviceFile f = apply(file, p);
        std::vector<Point> pts;
        for (double v : v_ms) {
            pts.push_back(evaluate(f, v));
            print(pts.back());
        }
        const Point& ref = pts.front();
        if (std::isfinite(ref.x_l) && std::isfinite(ref.x_r)) {
            // E_Z = k (B0 + G x) evaluated at the dot centroids (exact for a linear map).
            const double k = units::zeeman_hz_per_tesla;
            const double g = (ezr_target - ezl_target) / (k * (ref.x_r - ref.x_l));
            const double b0 = ezl_target / k - g * ref.x_l;
            std::printf("field map: B0 %.9f T  G %.9e T/nm\n", b0, g);
            if (!out_map.empty())
                MagnetFieldMap::linear(b0, g, 0.0, f.spec.width_nm(), 41).save(out_map);
        }
        if (!out_device.empty()) save_device_file(out_device, f);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
