#include "mitd/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "mitd/calibration.hpp"
#include "mitd/errors.hpp"
#include "mitd/plot.hpp"
#include "mitd/synth.hpp"
#include "mitd/table_model.hpp"
#include "mitd/transducer.hpp"

namespace mitd {

namespace {

namespace fs = std::filesystem;

// A flag value that parsed but makes no sense.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? std::string(1, sep) : "") + parts[i];
  return out;
}

struct SynthArgs {
  SynthSpec spec;
  std::string out;
};

struct TrainArgs {
  std::string train, dev, model, report;
  Hyperparameters hyper;
};

struct DecodeArgs {
  std::string model, test, out, predictions, dataset;
  std::string strategies = "greedy,beam:10,exact";
  std::string lower_bound = "none";
  std::optional<std::size_t> max_len, queue_capacity, train_size;
  std::size_t threads = 1;
};

struct AnalyzeArgs {
  std::vector<std::string> records;
  std::string report, curve;
};

struct PlotArgs {
  std::string curve, out;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthCorpus corpus;
  try {
    corpus = generate_synth(a.spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  write_synth(corpus, a.out);
  out << "wrote " << corpus.train.size() << '/' << corpus.dev.size() << '/'
      << corpus.test.size() << " samples to " << a.out << '\n';
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
  try {
    a.hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto train_raw = read_unimorph_file(a.train);
  const auto dev_raw = read_unimorph_file(a.dev);
  if (train_raw.empty()) throw DataError(a.train + ": no samples");
  if (dev_raw.empty()) throw DataError(a.dev + ": no samples");
  const Vocabulary vocab = build_vocabulary(train_raw);
  const auto train_set = encode_samples(vocab, train_raw);
  const auto dev_set = encode_samples(vocab, dev_raw);
  const TrainData data{train_set, dev_set, vocab.size()};
  const TrainResult result =
      train(data, a.hyper, [&out](std::size_t epoch, double loss, double accuracy) {
        out << "epoch " << epoch << "  loss " << loss << "  dev_accuracy " << accuracy << '\n';
      });
  save_model(result.params, a.hyper, vocab, a.model);
  const std::string report = a.report.empty() ? a.model + ".report.txt" : a.report;
  open_out(report) << result.report.to_text();
  out << "selected epoch " << result.report.selected_epoch << ", dev accuracy "
      << result.report.best_dev_accuracy() << "\nmodel " << a.model << "\nreport " << report
      << '\n';
}

bool is_table_file(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string first;
  std::getline(in, first);
  return first == "table v1";
}

void cmd_decode(const DecodeArgs& a, std::ostream& out) {
  DecodeOptions options;
  try {
    options.strategies = parse_strategy_list(a.strategies);
    if (a.lower_bound != "none") {
      const StrategySpec bound = StrategySpec::parse(a.lower_bound);
      if (bound.strategy != Strategy::beam) throw std::invalid_argument("must be beam:K");
      options.lower_bound_beam = bound.beam_width;
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  options.max_len = a.max_len;
  options.queue_capacity = a.queue_capacity;
  options.threads = a.threads;

  const auto samples = read_unimorph_file(a.test);
  if (samples.empty()) throw DataError(a.test + ": no samples");
  RecordSet records;
  if (is_table_file(a.model)) {
    std::ifstream in = open_in(a.model);
    const TableModel model = TableModel::read(in);
    records = decode_records(model, table_codec(model), samples, options);
  } else {
    SavedModel saved = load_model(a.model);
    const Transducer model(std::move(saved.params));
    records = decode_records(model, vocabulary_codec(saved.vocab), samples, options);
  }
  records.dataset = a.dataset.empty() ? fs::path(a.test).stem().string() : a.dataset;
  records.train_size = a.train_size;
  {
    std::ofstream file = open_out(a.out);
    write_records(records, file);
  }
  if (!a.predictions.empty()) {
    std::ofstream file = open_out(a.predictions);
    file << "sample_id\tlemma\tmsd\tgold";
    for (const auto& s : records.strategies) file << '\t' << s;
    file << '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const PredictionRecord& r = records.records[i];
      file << r.sample_id << '\t' << samples[i].lemma << '\t' << join(samples[i].msd, ';') << '\t'
           << r.gold;
      for (const auto& s : records.strategies) file << '\t' << r.results.at(s).y_hat;
      file << '\n';
    }
  }
  std::size_t failures = 0;
  for (const auto& r : records.records) {
    for (const auto& [name, o] : r.results) failures += o.failed ? 1 : 0;
  }
  out << "decoded " << samples.size() << " samples x " << records.strategies.size()
      << " strategies into " << a.out << "\nfailures " << failures << '\n';
}

void cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  std::vector<RecordSet> sets;
  for (const auto& path : a.records) {
    std::ifstream in = open_in(path);
    RecordSet set = read_records(in, path);
    sets.push_back(std::move(set));
  }
  const CalibrationReport report = build_report(sets);
  if (a.report.empty()) {
    report.write_csv(out);
  } else {
    std::ofstream file = open_out(a.report);
    report.write_csv(file);
  }
  out << report.to_text();
  if (!a.curve.empty()) {
    const auto curve = size_vs_empty_curve(sets);
    std::ofstream file = open_out(a.curve);
    write_curve(curve, file);
  }
}

void cmd_plot(const PlotArgs& a, std::ostream& out) {
  std::ifstream in = open_in(a.curve);
  const auto curve = read_curve(in);
  const std::string svg = render_curve_svg(curve);
  open_out(a.out) << svg;
  out << "wrote " << curve.size() << " points to " << a.out << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Character-level inflection toolkit: training, decoding and calibration"};
  app.name("mitd");
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic inflection corpus");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--seed", synth_args.spec.seed, "Generator seed");
  synth->add_option("--alphabet", synth_args.spec.alphabet_size, "Alphabet size (8-20)");
  synth->add_option("--min-lemma", synth_args.spec.min_lemma_len, "Shortest lemma");
  synth->add_option("--max-lemma", synth_args.spec.max_lemma_len, "Longest lemma");
  synth->add_option("--train-count", synth_args.spec.train_count, "Training samples");
  synth->add_option("--dev-count", synth_args.spec.dev_count, "Dev samples");
  synth->add_option("--test-count", synth_args.spec.test_count, "Test samples");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a transducer");
  train_cmd->add_option("--train", train_args.train, "Training TSV")->required();
  train_cmd->add_option("--dev", train_args.dev, "Dev TSV")->required();
  train_cmd->add_option("--model", train_args.model, "Output model file")->required();
  train_cmd->add_option("--report", train_args.report, "Training report (default MODEL.report.txt)");
  train_cmd->add_option("--seed", train_args.hyper.seed, "Run seed");
  train_cmd->add_option("--embed-dim", train_args.hyper.embed_dim);
  train_cmd->add_option("--hidden-dim", train_args.hyper.hidden_dim);
  train_cmd->add_option("--learning-rate", train_args.hyper.learning_rate);
  train_cmd->add_option("--batch-size", train_args.hyper.batch_size);
  train_cmd->add_option("--max-epochs", train_args.hyper.max_epochs);
  train_cmd->add_option("--patience", train_args.hyper.patience);
  train_cmd->add_option("--clip", train_args.hyper.grad_clip_norm, "Global gradient-norm clip");

  DecodeArgs decode_args;
  auto* decode_cmd = app.add_subcommand("decode", "Decode a dataset with several strategies");
  decode_cmd->add_option("--model", decode_args.model, "Model file (mitd1 or table v1)")
      ->required();
  decode_cmd->add_option("--test", decode_args.test, "Input TSV")->required();
  decode_cmd->add_option("--out", decode_args.out, "Records TSV")->required();
  decode_cmd->add_option("--predictions", decode_args.predictions, "Predictions TSV");
  decode_cmd->add_option("--strategies", decode_args.strategies, "e.g. greedy,beam:10,exact");
  decode_cmd->add_option("--max-len", decode_args.max_len, "Output length cap");
  decode_cmd->add_option("--lower-bound", decode_args.lower_bound, "none or beam:K");
  decode_cmd->add_option("--queue-capacity", decode_args.queue_capacity, "Exact-search queue cap");
  decode_cmd->add_option("--threads", decode_args.threads, "Decoding workers")
      ->check(CLI::PositiveNumber);
  decode_cmd->add_option("--dataset", decode_args.dataset, "Dataset name for reports");
  decode_cmd->add_option("--train-size", decode_args.train_size,
                         "Training-set size, for resource classes");

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "Calibration report from records files");
  analyze->add_option("--records", analyze_args.records, "Records TSV files")->required();
  analyze->add_option("--report", analyze_args.report, "Report CSV (default stdout)");
  analyze->add_option("--curve", analyze_args.curve, "Write the size/empty-string curve CSV");

  PlotArgs plot_args;
  auto* plot = app.add_subcommand("plot", "SVG plot of a size/empty-string curve");
  plot->add_option("--curve", plot_args.curve, "Curve CSV")->required();
  plot->add_option("--out", plot_args.out, "Output SVG")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) cmd_synth(synth_args, out);
    if (train_cmd->parsed()) cmd_train(train_args, out);
    if (decode_cmd->parsed()) cmd_decode(decode_args, out);
    if (analyze->parsed()) cmd_analyze(analyze_args, out);
    if (plot->parsed()) cmd_plot(plot_args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ModelFileError& e) {
    err << "model file error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitData;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace mitd
