#pragma once

#include <fstream>
#include <string>

#include "vrff/trainer.hpp"

namespace vrff {

/// Shortest decimal text that parses back to the exact double (tries %.15g,
/// widens to %.17g when that loses bits). NaN/Inf render as nan/inf.
std::string format_double(double value);

/// Append-only CSV log with columns iteration,elbo,log_lik,kl,eval_metric.
/// The header is written only when the file is new or empty, so resumed runs
/// keep appending to the same stream. Rows without an eval leave the last
/// field empty.
class MetricsWriter {
public:
  explicit MetricsWriter(const std::string& path);

  void append(const IterationRecord& record);
  const std::string& path() const { return path_; }

private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace vrff
