#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lhskit {

// Base class for every failure the toolkit can signal. Callers that only
// want pass/fail semantics can catch this and fold the message into a report.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SyntaxError : Error {
    std::size_t offset;  // byte offset into the source text
    SyntaxError(const std::string& msg, std::size_t off)
        : Error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

struct UnknownVariable : Error {
    std::string name;
    std::size_t offset;
    UnknownVariable(const std::string& var, std::size_t off)
        : Error("unknown variable '" + var + "' (at byte " + std::to_string(off) + ")"),
          name(var), offset(off) {}
};

struct DomainError : Error {
    using Error::Error;
};

struct DegreeError : Error {
    using Error::Error;
};

struct SingularSystem : Error {
    double smallest_singular_value;
    SingularSystem(const std::string& msg, double smin)
        : Error(msg + " (smallest singular value " + std::to_string(smin) + ")"),
          smallest_singular_value(smin) {}
};

struct IllConditioned : Error {
    double condition_number;
    IllConditioned(const std::string& msg, double cond)
        : Error(msg + " (condition number " + std::to_string(cond) + ")"),
          condition_number(cond) {}
};

struct SingularMap : Error {
    using Error::Error;
};

struct AxiomViolation : Error {
    using Error::Error;
};

struct NotSymplectic : Error {
    std::vector<double> point;
    double det_value;
    NotSymplectic(std::vector<double> p, double det)
        : Error("symplectic form degenerates (det " + std::to_string(det) + ")"),
          point(std::move(p)), det_value(det) {}
};

struct NotSymplecticBase : Error {
    using Error::Error;
};

struct QuotientMissing : Error {
    using Error::Error;
};

struct NotHyperbolic : Error {
    using Error::Error;
};

struct NewtonDivergence : Error {
    std::vector<double> seed;
    NewtonDivergence(const std::string& msg, std::vector<double> s)
        : Error(msg), seed(std::move(s)) {}
};

struct BlowUp : Error {
    using Error::Error;
};

struct StepTooLarge : Error {
    using Error::Error;
};

struct ExactnessViolation : Error {
    std::vector<double> point;
    double value;
    ExactnessViolation(std::vector<double> p, double v)
        : Error("Liouville form does not vanish on cylinder tangent (value " +
                std::to_string(v) + ")"),
          point(std::move(p)), value(v) {}
};

struct RelationViolation : Error {
    std::string relation;
    std::vector<double> point;
    double residual;
    RelationViolation(std::string rel, std::vector<double> p, double res)
        : Error("structure relation '" + rel + "' fails (residual " +
                std::to_string(res) + ")"),
          relation(std::move(rel)), point(std::move(p)), residual(res) {}
};

struct NotContact : Error {
    std::vector<double> point;
    explicit NotContact(std::vector<double> p)
        : Error("one-form is not contact at the query point"), point(std::move(p)) {}
};

struct ZeroVolume : Error {
    using Error::Error;
};

struct ConfigError : Error {
    std::string path;  // JSON path of the offending entry
    ConfigError(const std::string& jsonPath, const std::string& msg)
        : Error("config error at " + jsonPath + ": " + msg), path(jsonPath) {}
};

}  // namespace lhskit
