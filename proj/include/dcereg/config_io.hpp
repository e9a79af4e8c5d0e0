#pragma once

#include <filesystem>
#include <string>

#include "dcereg/evaluation.hpp"
#include "dcereg/optimizer.hpp"
#include "dcereg/phantom.hpp"

namespace dcereg {

/// Raised for malformed or unknown configuration content; message names the offending key.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Strict parse: every key must be a RegistrationConfig field (or format_version).
/// Missing keys keep the method defaults; `method` in the text may be overridden later.
RegistrationConfig parse_registration_config(const std::string &json_text,
                                             RegistrationMode default_method = RegistrationMode::groupwise);
RegistrationConfig load_registration_config(const std::filesystem::path &path,
                                            RegistrationMode default_method = RegistrationMode::groupwise);
std::string registration_config_to_json(const RegistrationConfig &c);

PhantomSpec parse_phantom_spec(const std::string &json_text);
std::string phantom_spec_to_json(const PhantomSpec &s);

EvaluationReport report_from_json(const std::string &json_text);

/// Per-iteration CSV with header resolution,iteration,metric,step,grad_norm,valid_samples.
std::string trace_to_csv(const OptimizationTrace &trace);
/// Diagnostic dump: iteration, metric, eigenvalue spectrum, valid samples, mean displacement.
std::string diagnostics_to_csv(const OptimizationTrace &trace);

}  // namespace dcereg
