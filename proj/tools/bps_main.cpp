// Command-line surface for Bernoulli prediction sets: calibrate the coverage
// target on labeled predictions, emit per-record inclusion probabilities,
// evaluate coverage/efficiency metrics, generate the synthetic benchmarks,
// and expose the credal-geometry diagnostics.
//
// Exit codes: 0 success, 2 input validation, 3 I/O, 4 saturation (only with
// --strict-saturation). Diagnostics go to stderr so pipelines can keep stdout
// and data files strict.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bps/bps.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitSaturation = 4;

using nlohmann::json;

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bps::io_error("cannot open " + path);
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

// "-" writes to stdout.
void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bps::io_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw bps::io_error("failed writing " + path);
}

bps::Method method_of(const std::string& mode) {
  if (mode == "bps" || mode == "bps-nom") return bps::Method::kBps;
  if (mode == "aps" || mode == "aps-nom") return bps::Method::kAps;
  throw bps::validation_error("unknown mode: " + mode);
}

bool is_nominal(const std::string& mode) {
  return mode == "bps-nom" || mode == "aps-nom";
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw bps::validation_error("alpha must lie in (0, 1)");
}

std::vector<double> parse_point(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      values.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw bps::validation_error("cannot parse number: " + tok);
    }
  }
  return values;
}

struct CalibrationDoc {
  double t_star = 1.0;
  bool saturated = false;
  bool conservative = false;
  int iterations = 0;
  double alpha = 0.1;
  std::string mode = "bps";
  double tol = 1e-6;
  int k = 0;
  std::int64_t n = 0;
  std::string input_digest;
  std::vector<std::pair<double, double>> trace;
};

json doc_to_json(const CalibrationDoc& doc) {
  json trace = json::array();
  for (const auto& [t, sum] : doc.trace) trace.push_back({t, sum});
  return json{{"t_star", doc.t_star},
              {"saturated", doc.saturated},
              {"conservative", doc.conservative},
              {"iterations", doc.iterations},
              {"alpha", doc.alpha},
              {"mode", doc.mode},
              {"tol", doc.tol},
              {"k", doc.k},
              {"n", doc.n},
              {"input_digest", doc.input_digest},
              {"trace", trace}};
}

CalibrationDoc doc_from_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file_bytes(path));
  } catch (const json::parse_error& e) {
    throw bps::validation_error(path + ": " + e.what());
  }
  CalibrationDoc doc;
  try {
    doc.t_star = j.at("t_star").get<double>();
    doc.saturated = j.at("saturated").get<bool>();
    doc.conservative = j.value("conservative", false);
    doc.iterations = j.value("iterations", 0);
    doc.alpha = j.at("alpha").get<double>();
    doc.mode = j.at("mode").get<std::string>();
    doc.tol = j.value("tol", 1e-6);
    doc.k = j.at("k").get<int>();
    doc.n = j.value("n", std::int64_t{0});
    doc.input_digest = j.value("input_digest", std::string{});
  } catch (const json::exception& e) {
    throw bps::validation_error(path + ": " + e.what());
  }
  return doc;
}

std::vector<bps::LabeledPrediction> labeled_records(const bps::Dataset& ds) {
  std::vector<bps::LabeledPrediction> out;
  out.reserve(ds.records.size());
  for (const auto& rec : ds.records) {
    if (!rec.label)
      throw bps::validation_error("record " + rec.id + " is missing a label");
    out.push_back({rec.prediction, *rec.label});
  }
  return out;
}

struct CommonArgs {
  double alpha = 0.1;
  std::string mode = "bps";
  bool conservative = false;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  int bins = 10;
  int jobs = 1;
  bool strict_saturation = false;
};

int cmd_calibrate(const CommonArgs& args, const std::string& in_path,
                  const std::string& out_path) {
  require_alpha(args.alpha);
  const std::string bytes = read_file_bytes(in_path);
  std::istringstream stream(bytes);
  const bps::Dataset ds = bps::load_predictions(stream, in_path);
  const auto cal = labeled_records(ds);

  CalibrationDoc doc;
  doc.alpha = args.alpha;
  doc.mode = args.mode;
  doc.tol = args.tol;
  doc.k = ds.k;
  doc.n = static_cast<std::int64_t>(cal.size());
  doc.input_digest = bps::digest_hex(bytes);

  if (is_nominal(args.mode)) {
    doc.t_star = 1.0 - args.alpha;
  } else {
    bps::CalibrateOptions options;
    options.tol = args.tol;
    options.method = method_of(args.mode);
    options.jobs = args.jobs;
    bps::CalibrationResult result =
        bps::calibrate_risk_control(cal, args.alpha, options);
    doc.t_star = result.t_star;
    doc.saturated = result.saturated;
    doc.iterations = result.iterations;
    doc.trace = result.trace;
  }
  if (args.conservative) {
    doc.t_star = bps::conservative_threshold(doc.t_star, args.alpha);
    doc.conservative = true;
  }

  write_text(out_path, doc_to_json(doc).dump(2) + "\n");
  if (doc.saturated) {
    std::cerr << "warning: calibration saturated (ceiling unattainable); "
                 "t_star = 1 emits full-support sets\n";
    if (args.strict_saturation) return kExitSaturation;
  }
  return 0;
}

int cmd_predict(const CommonArgs& args, const std::string& in_path,
                const std::string& out_path, const std::string& calibration_path,
                std::optional<double> t_flag, bool mode_given, bool sample) {
  const bps::Dataset ds = bps::load_predictions_file(in_path);

  std::string mode = args.mode;
  double t = 0.0;
  bool saturated = false;
  if (!calibration_path.empty()) {
    if (t_flag)
      throw bps::validation_error("--t and --calibration are mutually exclusive");
    const CalibrationDoc doc = doc_from_file(calibration_path);
    if (doc.k != ds.k) {
      std::ostringstream oss;
      oss << "calibration document expects k = " << doc.k
          << " but input has k = " << ds.k;
      throw bps::validation_error(oss.str());
    }
    if (mode_given && method_of(mode) != method_of(doc.mode)) {
      throw bps::validation_error("mode \"" + mode +
                                  "\" conflicts with calibration mode \"" +
                                  doc.mode + "\"");
    }
    if (!mode_given) mode = doc.mode;
    t = doc.t_star;
    saturated = doc.saturated;
  } else if (is_nominal(mode)) {
    require_alpha(args.alpha);
    t = 1.0 - args.alpha;
  } else if (t_flag) {
    t = *t_flag;
  } else {
    throw bps::validation_error(
        "need --t, --calibration, or a nominal mode with --alpha");
  }

  const bps::Method method = method_of(mode);
  bps::Rng rng(args.seed);
  std::ostringstream out;
  for (const auto& rec : ds.records) {
    const bps::BernoulliParams b = bps::params_at(rec.prediction, t, method);
    json line;
    line["id"] = rec.id;
    line["b"] = b.values();
    if (sample) line["set"] = bps::sample_set(b, rng).members();
    out << line.dump() << "\n";
  }
  write_text(out_path, out.str());

  if (saturated) {
    std::cerr << "warning: calibration document is saturated; sets cover the "
                 "full support\n";
    if (args.strict_saturation) return kExitSaturation;
  }
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& in_path,
                 const std::string& truth_path, const std::string& out_path,
                 std::string heatmap_path, const std::string& calibration_path,
                 bool equal_count_bins) {
  std::ifstream b_stream(in_path);
  if (!b_stream) throw bps::io_error("cannot open " + in_path);
  const auto [ids, params_list] = bps::load_params(b_stream, in_path);
  if (ids.empty()) throw bps::validation_error(in_path + ": no records");

  const bps::Dataset truth = bps::load_predictions_file(truth_path);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < truth.records.size(); ++i)
    index[truth.records[i].id] = i;

  std::vector<int> labels;
  std::vector<bps::ProbabilityVector> oracles;
  std::vector<bps::UncertaintyTriple> triples;
  bool all_oracles = true;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = index.find(ids[i]);
    if (it == index.end())
      throw bps::validation_error("id mismatch: \"" + ids[i] +
                                  "\" not present in " + truth_path);
    const bps::DatasetRecord& rec = truth.records[it->second];
    if (!rec.label)
      throw bps::validation_error("record " + rec.id + " is missing a label");
    if (params_list[i].k() != static_cast<std::size_t>(truth.k))
      throw bps::validation_error("b vector length differs from truth k");
    labels.push_back(*rec.label);
    triples.push_back(bps::uncertainty_decomposition(rec.prediction));
    if (rec.oracle) {
      oracles.push_back(*rec.oracle);
    } else {
      all_oracles = false;
    }
  }

  const bps::SummaryMetrics summary =
      all_oracles ? bps::summary_metrics(params_list, labels, oracles)
                  : bps::summary_metrics(params_list, labels);

  const std::vector<int> ssc_ids = bps::ssc_groups(params_list);
  const bps::GroupwiseCoverage ssc =
      bps::groupwise_worst_coverage(params_list, labels, ssc_ids);

  std::vector<double> eu;
  for (const auto& triple : triples) eu.push_back(triple.epistemic);
  const bps::EuscGroups eusc_bins = bps::eusc_groups(eu, args.bins);
  const bps::GroupwiseCoverage eusc =
      bps::groupwise_worst_coverage(params_list, labels, eusc_bins.ids);

  const bps::Heatmap heatmap = bps::au_eu_heatmap(
      triples, params_list, labels, args.bins,
      equal_count_bins ? bps::BinningMode::kEqualCount
                       : bps::BinningMode::kEqualWidth);

  json config{{"alpha", args.alpha},
              {"bins", args.bins},
              {"eusc_bins_used", eusc_bins.bins_used},
              {"eusc_reduced", eusc_bins.reduced},
              {"mode", args.mode}};
  json doc{{"marg_cvg", summary.marginal_coverage},
           {"set_size", summary.mean_set_size},
           {"cond_cvg", nullptr},
           {"ssc", ssc.worst},
           {"eusc", eusc.worst},
           {"t_star", nullptr},
           {"saturated", nullptr},
           {"seed", args.seed},
           {"n", ids.size()},
           {"config", config}};
  if (summary.conditional_coverage) doc["cond_cvg"] = *summary.conditional_coverage;
  if (!calibration_path.empty()) {
    const CalibrationDoc cal_doc = doc_from_file(calibration_path);
    doc["t_star"] = cal_doc.t_star;
    doc["saturated"] = cal_doc.saturated;
  }
  if (eusc_bins.reduced)
    std::cerr << "warning: EUSC bins reduced to " << eusc_bins.bins_used
              << " (fewer records than bins)\n";

  std::ostringstream metrics_text;
  bps::write_metrics(metrics_text, doc);
  write_text(out_path, metrics_text.str());

  if (heatmap_path.empty() && out_path != "-")
    heatmap_path = out_path + ".heatmap.csv";
  if (!heatmap_path.empty()) {
    std::ostringstream csv;
    bps::write_heatmap_csv(csv, heatmap);
    write_text(heatmap_path, csv.str());
  }
  return 0;
}

int cmd_synth(const std::string& generator, int n, int k, double d,
              std::uint64_t seed, const std::string& out_path,
              std::string centers_path) {
  if (generator == "tv") {
    const auto [ds, centers] = bps::gen_tv_synthetic(n, k, d, seed);
    std::ostringstream main_text, centers_text;
    bps::write_predictions(main_text, ds);
    bps::write_predictions(centers_text, centers);
    write_text(out_path, main_text.str());
    if (centers_path.empty() && out_path != "-")
      centers_path = out_path + ".centers";
    if (!centers_path.empty()) write_text(centers_path, centers_text.str());
    return 0;
  }
  if (generator == "aps-synth") {
    const bps::Dataset ds = bps::gen_aps_synthetic(n, k, seed);
    std::ostringstream text;
    bps::write_predictions(text, ds);
    write_text(out_path, text.str());
    std::cerr << "note: class scores are mapped through a softmax (recorded in "
                 "the dataset meta as z_normalization)\n";
    return 0;
  }
  throw bps::validation_error("unknown generator: " + generator);
}

int cmd_vertices(const std::string& point_csv, double d,
                 const std::string& out_path) {
  const bps::ProbabilityVector center(parse_point(point_csv));
  const bps::TvBall ball(center, d);
  const bps::SecondOrderPrediction vertices = bps::tv_ball_vertices(ball);
  std::ostringstream out;
  for (const auto& v : vertices.vertices()) {
    json line;
    line["vertex"] = v.probs();
    line["tv"] = bps::tv_distance(center, v);
    out << line.dump() << "\n";
  }
  write_text(out_path, out.str());
  return 0;
}

int cmd_depth(const std::string& in_path, const std::string& point_csv,
              int directions, std::uint64_t seed, const std::string& out_path) {
  const bps::Dataset ds = bps::load_predictions_file(in_path);
  std::optional<bps::ProbabilityVector> fixed;
  if (!point_csv.empty()) fixed = bps::ProbabilityVector(parse_point(point_csv));

  std::ostringstream out;
  bps::Rng rng(seed);
  for (const auto& rec : ds.records) {
    const bps::ProbabilityVector* target = nullptr;
    if (fixed) {
      target = &*fixed;
    } else if (rec.oracle) {
      target = &*rec.oracle;
    } else {
      throw bps::validation_error("record " + rec.id +
                                  " has no oracle and no --p was given");
    }
    const double depth =
        bps::estimate_tukey_depth(*target, rec.prediction, directions, rng);
    json line;
    line["id"] = rec.id;
    line["depth"] = depth;
    out << line.dump() << "\n";
  }
  write_text(out_path, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bernoulli prediction sets: minimal randomized sets with "
               "conditional coverage under valid second-order predictions"};
  app.require_subcommand(1);

  CommonArgs args;

  std::string in_path, out_path = "-", truth_path, calibration_path;
  std::string heatmap_path, centers_path, point_csv, generator = "tv";
  std::optional<double> t_flag;
  bool sample = false, equal_count_bins = false;
  int synth_n = 1000, synth_k = 3, directions = 256;
  double synth_d = 0.1, vertices_d = 0.1;

  auto* calibrate =
      app.add_subcommand("calibrate", "conformal risk-control calibration");
  calibrate->add_option("--in", in_path, "labeled prediction file")->required();
  calibrate->add_option("--out", out_path, "calibration document (- = stdout)");
  calibrate->add_option("--alpha", args.alpha, "miscoverage level");
  calibrate->add_option("--mode", args.mode, "bps|aps|bps-nom|aps-nom");
  calibrate->add_flag("--conservative", args.conservative,
                      "never calibrate below 1 - alpha");
  calibrate->add_option("--tol", args.tol, "binary-search tolerance");
  calibrate->add_option("--jobs", args.jobs, "worker threads per search step");
  calibrate->add_flag("--strict-saturation", args.strict_saturation,
                      "exit 4 when the ceiling is unattainable");

  auto* predict = app.add_subcommand("predict", "emit per-record b vectors");
  predict->add_option("--in", in_path, "prediction file")->required();
  predict->add_option("--out", out_path, "b-vector file (- = stdout)");
  auto* predict_mode =
      predict->add_option("--mode", args.mode, "bps|aps|bps-nom|aps-nom");
  predict->add_option("--t", t_flag, "explicit coverage target");
  predict->add_option("--calibration", calibration_path,
                      "calibration document from `calibrate`");
  predict->add_option("--alpha", args.alpha, "level for nominal modes");
  predict->add_option("--seed", args.seed, "seed for --sample draws");
  predict->add_flag("--sample", sample, "also emit one realized label set");
  predict->add_flag("--strict-saturation", args.strict_saturation,
                    "exit 4 when the calibration was saturated");

  auto* evaluate = app.add_subcommand("evaluate", "coverage/efficiency metrics");
  evaluate->add_option("--in", in_path, "b-vector file")->required();
  evaluate->add_option("--truth", truth_path, "prediction file with labels")
      ->required();
  evaluate->add_option("--out", out_path, "metrics document (- = stdout)");
  evaluate->add_option("--heatmap", heatmap_path,
                       "AU/EU heatmap CSV (default <out>.heatmap.csv)");
  evaluate->add_option("--calibration", calibration_path,
                       "calibration document to echo t_star from");
  evaluate->add_option("--bins", args.bins, "EUSC/heatmap bin count");
  evaluate->add_flag("--equal-count-bins", equal_count_bins,
                     "equal-count heatmap bins instead of equal-width");
  evaluate->add_option("--alpha", args.alpha, "echoed into the document");
  evaluate->add_option("--mode", args.mode, "echoed into the document");
  evaluate->add_option("--seed", args.seed, "echoed into the document");

  auto* synth = app.add_subcommand("synth", "write synthetic benchmark files");
  synth->add_option("--gen", generator, "tv|aps-synth")->required();
  synth->add_option("--n", synth_n, "number of records")->required();
  synth->add_option("--k", synth_k, "number of classes");
  synth->add_option("--d", synth_d, "TV-ball radius (tv generator)");
  synth->add_option("--seed", args.seed, "generator seed");
  synth->add_option("--out", out_path, "prediction file")->required();
  synth->add_option("--centers-out", centers_path,
                    "centers sidecar (tv generator; default <out>.centers)");

  auto* vertices = app.add_subcommand("vertices", "analytic TV-ball vertices");
  vertices->add_option("--p", point_csv, "center, comma separated")->required();
  vertices->add_option("--d", vertices_d, "TV radius")->required();
  vertices->add_option("--out", out_path, "vertex listing (- = stdout)");

  auto* depth = app.add_subcommand("depth", "Tukey-depth diagnostic");
  depth->add_option("--in", in_path, "prediction file")->required();
  depth->add_option("--p", point_csv, "query point (default: record oracle)");
  depth->add_option("--directions", directions, "random directions");
  depth->add_option("--seed", args.seed, "direction seed");
  depth->add_option("--out", out_path, "depth listing (- = stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed()) return cmd_calibrate(args, in_path, out_path);
    if (predict->parsed())
      return cmd_predict(args, in_path, out_path, calibration_path, t_flag,
                         predict_mode->count() > 0, sample);
    if (evaluate->parsed())
      return cmd_evaluate(args, in_path, truth_path, out_path, heatmap_path,
                          calibration_path, equal_count_bins);
    if (synth->parsed())
      return cmd_synth(generator, synth_n, synth_k, synth_d, args.seed,
                       out_path, centers_path);
    if (vertices->parsed()) return cmd_vertices(point_csv, vertices_d, out_path);
    if (depth->parsed())
      return cmd_depth(in_path, point_csv, directions, args.seed, out_path);
  } catch (const bps::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const bps::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
