#pragma once

#include <stdexcept>
#include <string>

namespace dbmlab {

struct NonConvergence : std::runtime_error {
    double residual;
    double energy;
    double eta;
    NonConvergence(double res, double e, double h)
        : std::runtime_error("fixed point not converged, residual " + std::to_string(res) +
                             " at E=" + std::to_string(e) + " eta=" + std::to_string(h)),
          residual(res), energy(e), eta(h) {}
};

struct NotSymmetric : std::runtime_error {
    NotSymmetric() : std::runtime_error("matrix is not symmetric within tolerance") {}
};

struct IndexOutOfBulk : std::runtime_error {
    explicit IndexOutOfBulk(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientSamples : std::runtime_error {
    explicit InsufficientSamples(const std::string& what) : std::runtime_error(what) {}
};

struct StepCollapse : std::runtime_error {
    double time;
    explicit StepCollapse(double t)
        : std::runtime_error("integrator could not restore particle ordering at t=" +
                             std::to_string(t)),
          time(t) {}
};

struct KernelSingular : std::runtime_error {
    explicit KernelSingular(const std::string& what) : std::runtime_error(what) {}
};

struct WindowOutsideBulk : std::runtime_error {
    explicit WindowOutsideBulk(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigInvalid : std::runtime_error {
    std::string field;
    ConfigInvalid(std::string f, const std::string& why)
        : std::runtime_error("config field '" + f + "': " + why), field(std::move(f)) {}
};

} // namespace dbmlab
