#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qrag/common.hpp"

namespace qrag {

// One record per update step. eval_f1 carries one slot per configured eval
// length and stays empty on steps without an evaluation pass.
struct MetricsRow {
    int64_t step = 0;
    double loss = 0.0;
    double mean_return = 0.0;
    double rollout_recall = 0.0;
    std::vector<std::optional<double>> eval_f1;
    double lr = 0.0;
    double alpha = 0.0;
    double grad_norm = 0.0;
    double wallclock = 0.0;  // seconds since run start
};

namespace detail {

inline std::string fmt_double(double v) {
    if (!std::isfinite(v)) return "null";
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

}  // namespace detail

// Appends rows to a CSV file and mirrors them as JSON lines. Column order is
// fixed: step, loss, mean_return, rollout_recall, one eval_f1 column per
// length, lr, alpha, grad_norm, wallclock. Missing eval values are empty
// cells in the CSV and nulls in the JSONL.
class MetricsWriter {
  public:
    MetricsWriter(const std::string& csv_path, const std::string& jsonl_path,
                  const std::vector<int32_t>& eval_lengths, bool append = false)
        : eval_lengths_(eval_lengths) {
        const auto mode = append ? std::ios::app : std::ios::trunc;
        csv_.open(csv_path, mode);
        if (!csv_) throw IoError("cannot open " + csv_path + " for writing");
        jsonl_.open(jsonl_path, mode);
        if (!jsonl_) throw IoError("cannot open " + jsonl_path + " for writing");
        if (!append) {
            csv_ << "step,loss,mean_return,rollout_recall";
            for (int32_t len : eval_lengths_) csv_ << ",eval_f1_" << len;
            csv_ << ",lr,alpha,grad_norm,wallclock\n";
        }
    }

    void append(const MetricsRow& row) {
        if (row.eval_f1.size() != eval_lengths_.size())
            throw InvalidArgument("metrics row has " + std::to_string(row.eval_f1.size()) +
                                  " eval slots, writer expects " +
                                  std::to_string(eval_lengths_.size()));
        csv_ << row.step << ',' << detail::fmt_double(row.loss) << ','
             << detail::fmt_double(row.mean_return) << ','
             << detail::fmt_double(row.rollout_recall);
        for (const auto& f1 : row.eval_f1) {
            csv_ << ',';
            if (f1) csv_ << detail::fmt_double(*f1);
        }
        csv_ << ',' << detail::fmt_double(row.lr) << ',' << detail::fmt_double(row.alpha) << ','
             << detail::fmt_double(row.grad_norm) << ',' << detail::fmt_double(row.wallclock)
             << '\n';
        csv_.flush();

        nlohmann::json j;
        j["step"] = row.step;
        j["loss"] = row.loss;
        j["mean_return"] = row.mean_return;
        j["rollout_recall"] = row.rollout_recall;
        for (size_t i = 0; i < eval_lengths_.size(); ++i) {
            const std::string key = "eval_f1_" + std::to_string(eval_lengths_[i]);
            if (row.eval_f1[i])
                j[key] = *row.eval_f1[i];
            else
                j[key] = nullptr;
        }
        j["lr"] = row.lr;
        j["alpha"] = row.alpha;
        j["grad_norm"] = row.grad_norm;
        j["wallclock"] = row.wallclock;
        jsonl_ << j.dump() << '\n';
        jsonl_.flush();
    }

    const std::vector<int32_t>& eval_lengths() const { return eval_lengths_; }

  private:
    std::vector<int32_t> eval_lengths_;
    std::ofstream csv_;
    std::ofstream jsonl_;
};

}  // namespace qrag
