#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <shared_mutex>
#include <vector>

#include "dqd/exchange.hpp"
#include "dqd/spin_params.hpp"
#include "dqd/zeeman.hpp"

namespace dqd {

/// Zeeman splittings of both dots and the exchange coupling of a converged solution.
SpinParams spin_params(const ConvergedSolution& s, const MagnetFieldMap& map);

/// self_consistent_solve followed by the Zeeman and exchange extraction.
SpinParams spin_params(const DeviceSpec& spec, const MaterialParams& mat, const DeviceBiases& b,
                       const MagnetFieldMap& map, const ScfOptions& opts = {});

/// Device plus field map with a thread-safe cache of converged solutions and spin parameters,
/// keyed by the bias point rounded to 1 uV.
class DeviceModel {
public:
    DeviceModel(DeviceSpec spec, MaterialParams mat, MagnetFieldMap map, ScfOptions opts = {});

    std::shared_ptr<const ConvergedSolution> solution(const DeviceBiases& b) const;
    SpinParams spin_params(const DeviceBiases& b) const;

    const DeviceSpec& spec() const { return spec_; }
    const MaterialParams& materials() const { return mat_; }
    const MagnetFieldMap& field_map() const { return map_; }
    const ScfOptions& options() const { return opts_; }
    std::size_t cached_solutions() const;

private:
    using Key = std::array<std::int64_t, 5>;
    static Key key(const DeviceBiases& b);

    DeviceSpec spec_;
    MaterialParams mat_;
    MagnetFieldMap map_;
    ScfOptions opts_;
    mutable std::shared_mutex mutex_;
    mutable std::map<Key, std::shared_ptr<const ConvergedSolution>> solutions_;
    mutable std::map<Key, SpinParams> params_;
};

/// CSV with columns V_M,E_ZL_GHz,E_ZR_GHz,J_Hz (V_M in volts).
void write_spin_params_csv(std::ostream& os, const std::vector<SpinParams>& rows);

}  // namespace dqd
