#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kinn/problem.hpp"
#include "kinn/trainer.hpp"

namespace kinn {

/// Training configuration from a JSON object. Omitted keys keep the
/// TrainConfig defaults; unknown keys and ill-typed values raise ConfigError
/// naming the key.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);

/// Reads a parameter CSV with header a_p,a_q,p_bar,p_plus,q_bar,q_plus,p_max.
/// Rows are numbered from 1 after the header; a malformed or
/// invariant-violating row raises InputError naming it.
ParamBatch read_param_csv(std::istream& is);
ParamBatch read_param_csv_file(const std::string& path);

/// Entry point of the `kinn` executable. Errors are reported on `err` as one
/// line `error: <kind>: <message>` and give a nonzero return value.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kinn
