#include "vrff/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>

namespace vrff {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", value);
  if (std::strtod(buf, nullptr) == value) return buf;
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("metrics: cannot open '" + path + "'");
  if (fresh) {
    out_ << "iteration,elbo,log_lik,kl,eval_metric\n";
    out_.flush();
  }
}

void MetricsWriter::append(const IterationRecord& record) {
  out_ << record.iteration << ',' << format_double(record.elbo) << ','
       << format_double(record.log_lik) << ',' << format_double(record.kl) << ',';
  if (record.has_eval) out_ << format_double(record.eval_metric);
  out_ << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("metrics: write failed on '" + path_ + "'");
}

}  // namespace vrff
