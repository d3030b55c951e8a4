#include "dqd/device_model.hpp"

#include <cmath>
#include <mutex>
#include <ostream>

namespace dqd {

SpinParams spin_params(const ConvergedSolution& s, const MagnetFieldMap& map) {
    const DotRegions dots = find_dots(s);
    const auto [ezl, ezr] = zeeman_splittings(s.grid, s.spectrum, dots, map);
    SpinParams p;
    p.ez_left = ezl;
    p.ez_right = ezr;
    p.j = exchange_energy(s.grid, s.spectrum, dots, s.materials.eps_si).j_hz;
    p.biases = s.biases;
    return p;
}

SpinParams spin_params(const DeviceSpec& spec, const MaterialParams& mat, const DeviceBiases& b,
                       const MagnetFieldMap& map, const ScfOptions& opts) {
    return spin_params(self_consistent_solve(spec, mat, b, opts), map);
}

DeviceModel::DeviceModel(DeviceSpec spec, MaterialParams mat, MagnetFieldMap map, ScfOptions opts)
    : spec_(std::move(spec)), mat_(std::move(mat)), map_(std::move(map)), opts_(std::move(opts)) {
    spec_.validate();
    mat_.validate();
}

DeviceModel::Key DeviceModel::key(const DeviceBiases& b) {
    auto q = [](double v) { return static_cast<std::int64_t>(std::llround(v * 1e6)); };
    return {q(b.v_b), q(b.v_l), q(b.v_m), q(b.v_r), q(b.drain)};
}

std::shared_ptr<const ConvergedSolution> DeviceModel::solution(const DeviceBiases& b) const {
    const Key k = key(b);
    {
        std::shared_lock lock(mutex_);
        if (auto it = solutions_.find(k); it != solutions_.end()) return it->second;
    }
    // Solve outside the lock; concurrent misses on the same key produce identical results and
    // the first one stored wins.
    auto s = std::make_shared<const ConvergedSolution>(self_consistent_solve(spec_, mat_, b, opts_));
    std::unique_lock lock(mutex_);
    return solutions_.emplace(k, std::move(s)).first->second;
}

SpinParams DeviceModel::spin_params(const DeviceBiases& b) const {
    const Key k = key(b);
    {
        std::shared_lock lock(mutex_);
        if (auto it = params_.find(k); it != params_.end()) return it->second;
    }
    const SpinParams p = dqd::spin_params(*solution(b), map_);
    std::unique_lock lock(mutex_);
    return params_.emplace(k, p).first->second;
}

std::size_t DeviceModel::cached_solutions() const {
    std::shared_lock lock(mutex_);
    return solutions_.size();
}

void write_spin_params_csv(std::ostream& os, const std::vector<SpinParams>& rows) {
    os << "V_M,E_ZL_GHz,E_ZR_GHz,J_Hz\n";
    const auto old = os.precision(12);
    for (const auto& p : rows)
        os << p.biases.v_m << ',' << p.ez_left_ghz() << ',' << p.ez_right_ghz() << ',' << p.j << '\n';
    os.precision(old);
}

}  // namespace dqd
