// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/encoding/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "vidbrain/io/checkpoint.hpp"

namespace vidbrain::encoding {

EncodingReport encode_subject(const synth::TrMatrix& x, const synth::ParcelSeries& y, const EncodeOptions& options) {
  std::map<std::size_t, std::size_t> y_row;
  for (std::size_t i = 0; i < y.y.rows(); ++i) y_row[y.y.tr[i]] = i;
  std::vector<std::pair<std::size_t, std::size_t>> rows;  // (x row, y row)
  for (std::size_t i = 0; i < x.rows(); ++i)
    if (auto it = y_row.find(x.tr[i]); it != y_row.end()) rows.emplace_back(i, it->second);
  const std::size_t n = rows.size();
  if (n < 10) throw std::invalid_argument("encode_subject: need at least 10 aligned rows, got " + std::to_string(n));
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0))
    throw std::invalid_argument("encode_subject: train_fraction must lie in (0, 1)");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_test =
      std::max<std::size_t>(2, n - static_cast<std::size_t>(std::floor(options.train_fraction * static_cast<double>(n))));
  const std::size_t n_train = n - n_test;
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());

  const std::size_t p = x.cols, P = y.y.cols;
  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (std::size_t i : train)
    for (std::size_t c = 0; c < p; ++c) mean[c] += x.at(rows[i].first, c);
  for (double& m : mean) m /= static_cast<double>(n_train);
  for (std::size_t i : train)
    for (std::size_t c = 0; c < p; ++c) {
      const double d = x.at(rows[i].first, c) - mean[c];
      sd[c] += d * d;
    }
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(n_train));

  auto design = [&](const std::vector<std::size_t>& idx) {
    Matrix m(idx.size(), p);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < p; ++c)
        m.at(r, c) = sd[c] > 1e-12 * std::max(1.0, std::abs(mean[c])) ? (x.at(rows[idx[r]].first, c) - mean[c]) / sd[c]
                                                                       : 0.0;
    return m;
  };
  auto targets = [&](const std::vector<std::size_t>& idx) {
    Matrix m(idx.size(), P);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < P; ++c) m.at(r, c) = y.y.at(rows[idx[r]].second, c);
    return m;
  };
  const Matrix x_train = design(train), x_test = design(test);
  const Matrix y_train = targets(train), y_test = targets(test);

  const RidgeSolver solver(x_train);
  const std::vector<double> lambdas = loo_select_lambdas(solver, y_train, options.grid);
  const Matrix b = solver.fit_columns(y_train, lambdas);

  EncodingReport rep;
  rep.subject = options.subject;
  rep.n_train = n_train;
  rep.n_test = n_test;
  rep.tap = options.tap;
  rep.delay_trs = options.delay_trs;
  for (std::size_t i : train) rep.train_trs.push_back(x.tr[rows[i].first]);
  for (std::size_t i : test) rep.test_trs.push_back(x.tr[rows[i].first]);
  std::vector<double> pred(n_test);
  double sum = 0.0;
  rep.max_r = -1.0;
  for (std::size_t c = 0; c < P; ++c) {
    for (std::size_t r = 0; r < n_test; ++r) {
      double v = 0.0;
      for (std::size_t k = 0; k < p; ++k) v += x_test.at(r, k) * b.at(k, c);
      pred[r] = v;
    }
    const PearsonResult pr = pearson_r(y_test.col(c), pred);
    rep.parcels.push_back({c, lambdas[c], pr.r, pr.degenerate});
    sum += pr.r;
    rep.max_r = std::max(rep.max_r, pr.r);
  }
  rep.mean_r = sum / static_cast<double>(P);
  return rep;
}

std::string report_csv(const std::vector<EncodingReport>& reports) {
  std::ostringstream out;
  out.precision(17);
  out << "subject,parcel,lambda,r\n";
  for (const auto& rep : reports)
    for (const auto& p : rep.parcels) out << rep.subject << "," << p.parcel << "," << p.lambda << "," << p.r << "\n";
  return out.str();
}

nlohmann::json report_summary(const EncodingReport& r) {
  return {{"subject", r.subject}, {"max_r", r.max_r},  {"mean_r", r.mean_r},      {"n_train", r.n_train},
          {"n_test", r.n_test},   {"tap", r.tap},      {"delay_trs", r.delay_trs}};
}

void write_report(const std::filesystem::path& stem, const EncodingReport& r) {
  io::write_file(stem.string() + ".csv", report_csv({r}));
  io::write_file(stem.string() + ".json", report_summary(r).dump(2) + "\n");
}

}  // namespace vidbrain::encoding
