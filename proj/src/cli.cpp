#include "asas/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "asas/corpus.hpp"
#include "asas/ensemble.hpp"
#include "asas/error.hpp"
#include "asas/features.hpp"
#include "asas/hyperopt.hpp"
#include "asas/learners.hpp"
#include "asas/metrics.hpp"
#include "asas/pipeline.hpp"
#include "asas/rng.hpp"
#include "asas/textio.hpp"

namespace asas::cli {
namespace {

namespace fs = std::filesystem;
using corpus::LogProbMatrix;
using corpus::PromptCorpus;
using corpus::ScoredResponse;

struct RunConfig {
  std::string data;
  std::string test;
  std::string solution;
  std::string prompts_dir;
  std::string embeddings;
  std::vector<std::string> members;
  std::string model_dir;
  std::string out;
  std::optional<int> prompt;
  bool all_prompts = false;
  double dev_frac = 0.2;
  std::uint64_t seed = 0;
  int trials = 20;
  int m = 2;
  bool resume = false;
  std::string split = "auto";
  std::string metric = "qwk,smd";

  pipeline::FeatureParams params;
  pipeline::TrainOptions train;
};

using Digests = std::vector<std::pair<std::string, std::string>>;

class Session {
 public:
  Session(const RunConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out) {}

  const RunConfig& cfg() const { return cfg_; }
  std::ostream& out() { return out_; }

  std::string read_input(const std::string& path) {
    if (path.empty()) fail(Errc::InvalidArgument, "missing input path");
    std::string bytes = textio::read_file(path);
    digests_.emplace_back(fs::path(path).filename().string(), textio::sha256_hex(bytes));
    return bytes;
  }

  std::string header() const { return textio::artifact_header(cfg_.seed, digests_); }

  std::string logprob_header_fields() const {
    std::string inputs;
    for (const auto& [name, hex] : digests_) inputs += (inputs.empty() ? "" : ",") + name + ":" + hex.substr(0, 16);
    return "asas=" ASAS_VERSION "\tseed=" + std::to_string(cfg_.seed) + "\tinputs=" + (inputs.empty() ? "-" : inputs);
  }

  fs::path out_dir() const {
    if (cfg_.out.empty()) fail(Errc::InvalidArgument, "--out is required for this command");
    return cfg_.out;
  }

  void write_artifact(const fs::path& name, const std::string& body) {
    textio::write_file(out_dir() / name, header() + "\n" + body);
  }

  void write_logprobs(const fs::path& name, const LogProbMatrix& m) {
    textio::write_file(out_dir() / name, corpus::write_logprobs(m, logprob_header_fields()));
  }

  // Training and test data, loaded once.
  const std::vector<ScoredResponse>& data() {
    if (!data_) data_ = corpus::parse_dataset(read_input(cfg_.data));
    return *data_;
  }

  const std::vector<ScoredResponse>& test() {
    if (!test_) {
      test_.emplace();
      if (!cfg_.test.empty()) {
        *test_ = corpus::parse_dataset(read_input(cfg_.test));
        if (!cfg_.solution.empty()) corpus::join_scores(*test_, corpus::parse_solution(read_input(cfg_.solution)));
      }
    }
    return *test_;
  }

  const corpus::EmbeddingTable* embeddings() {
    if (cfg_.embeddings.empty()) return nullptr;
    if (!embeddings_) embeddings_ = corpus::load_embeddings(read_input(cfg_.embeddings));
    return &*embeddings_;
  }

  std::vector<int> prompts(bool default_all) {
    if (cfg_.prompt && cfg_.all_prompts) fail(Errc::InvalidArgument, "--prompt and --all-prompts are exclusive");
    if (cfg_.prompt) return {*cfg_.prompt};
    if (!cfg_.all_prompts && !default_all) fail(Errc::InvalidArgument, "choose --prompt N or --all-prompts");
    std::set<int> ids;
    for (const auto& r : data()) ids.insert(r.prompt_id);
    if (ids.empty()) fail(Errc::EmptyInput, "no responses in " + cfg_.data);
    return {ids.begin(), ids.end()};
  }

  PromptCorpus corpus_for(int prompt) {
    std::vector<ScoredResponse> test_rows;
    for (const auto& r : test())
      if (r.prompt_id == prompt) test_rows.push_back(r);
    std::string prompt_text;
    if (!cfg_.prompts_dir.empty()) {
      const fs::path p = fs::path(cfg_.prompts_dir) / (std::to_string(prompt) + ".txt");
      if (fs::exists(p)) prompt_text = read_input(p.string());
    }
    return corpus::make_prompt_corpus(data(), prompt, cfg_.dev_frac, cfg_.seed, test_rows, std::move(prompt_text));
  }

  // Human inter-rater QWK on dev, when second reads exist.
  static std::optional<double> human_qwk(const PromptCorpus& c) {
    const bool second = std::all_of(c.dev.begin(), c.dev.end(), [](const auto& r) { return r.score2.has_value(); });
    if (!second || c.dev.empty()) return std::nullopt;
    return corpus::corpus_stats(c).dev_qwk;
  }

  std::vector<LogProbMatrix> load_members() {
    std::vector<std::string> files;
    for (const auto& entry : cfg_.members) {
      if (fs::is_directory(entry)) {
        std::vector<std::string> found;
        for (const auto& f : fs::directory_iterator(entry))
          if (f.is_regular_file() && f.path().extension() == ".logprobs") found.push_back(f.path().string());
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
      } else {
        files.push_back(entry);
      }
    }
    if (files.empty()) fail(Errc::InvalidArgument, "--members names no log-prob files");
    std::vector<LogProbMatrix> out;
    for (const auto& f : files) {
      try {
        out.push_back(corpus::load_logprobs(read_input(f)));
      } catch (const Error& e) {
        if (e.code() == Errc::Io) throw;
        fail(e.code(), f + ": " + e.what());
      }
    }
    return out;
  }

 private:
  const RunConfig& cfg_;
  std::ostream& out_;
  Digests digests_;
  std::optional<std::vector<ScoredResponse>> data_;
  std::optional<std::vector<ScoredResponse>> test_;
  std::optional<corpus::EmbeddingTable> embeddings_;
};

std::string prompt_stem(const std::string& base, int prompt) { return base + ".p" + std::to_string(prompt); }

bool test_labeled(const PromptCorpus& c) {
  return !c.test.empty() && std::all_of(c.test.begin(), c.test.end(), [](const auto& r) { return r.score1.has_value(); });
}

// Split used for reporting: test when labeled, dev otherwise.
std::span<const ScoredResponse> eval_split(const PromptCorpus& c, const std::string& which) {
  if (which == "dev") return c.dev;
  if (which == "test") {
    if (!test_labeled(c)) fail(Errc::InvalidArgument, "prompt " + std::to_string(c.prompt_id) + " has no labeled test split");
    return c.test;
  }
  if (which != "auto") fail(Errc::InvalidArgument, "--split must be auto, dev or test");
  return test_labeled(c) ? std::span<const ScoredResponse>(c.test) : std::span<const ScoredResponse>(c.dev);
}

std::string split_name(const PromptCorpus& c, std::span<const ScoredResponse> s) {
  return s.data() == c.test.data() && !c.test.empty() ? "test" : "dev";
}

// ---------------------------------------------------------------------------

int cmd_ingest(Session& s) {
  std::ostringstream os;
  os << "prompt\tn\tmin_score\tmax_score\tsecond_read\ttest_n\n";
  for (int p : s.prompts(true)) {
    std::size_t n = 0, second = 0, test_n = 0;
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (const auto& r : s.data()) {
      if (r.prompt_id != p) continue;
      for (auto sc : {r.score1, r.score2}) {
        if (!sc) continue;
        lo = std::min(lo, *sc);
        hi = std::max(hi, *sc);
      }
      ++n;
      second += r.score2.has_value();
    }
    for (const auto& r : s.test()) test_n += r.prompt_id == p;
    if (n == 0) fail(Errc::EmptyInput, "prompt " + std::to_string(p) + " has no responses");
    os << p << '\t' << n << '\t' << lo << '\t' << hi << '\t' << (second == n ? "yes" : "no") << '\t' << test_n << '\n';
  }
  if (!s.cfg().out.empty()) s.write_artifact("ingest.tsv", os.str());
  s.out() << os.str();
  return kExitOk;
}

int cmd_stats(Session& s) {
  std::ostringstream os;
  os << corpus::stats_tsv_header() << '\n';
  for (int p : s.prompts(true)) os << corpus::stats_tsv_row(corpus::corpus_stats(s.corpus_for(p))) << '\n';
  if (!s.cfg().out.empty()) s.write_artifact("stats.tsv", os.str());
  s.out() << os.str();
  return kExitOk;
}

int cmd_split(Session& s) {
  std::ostringstream os;
  os << "id\tprompt\tsplit\n";
  for (int p : s.prompts(true)) {
    const auto c = s.corpus_for(p);
    for (const auto& r : c.train) os << r.id << '\t' << p << "\ttrain\n";
    for (const auto& r : c.dev) os << r.id << '\t' << p << "\tdev\n";
    for (const auto& r : c.test) os << r.id << '\t' << p << "\ttest\n";
  }
  if (!s.cfg().out.empty()) {
    s.write_artifact("split.tsv", os.str());
  } else {
    s.out() << os.str();
  }
  return kExitOk;
}

void write_feature_model(Session& s, const pipeline::FeatureModel& model, const std::string& stem) {
  s.write_artifact(stem + ".spec", features::serialize_spec(model.spec));
  s.write_artifact(stem + ".mlp", learners::serialize_mlp(model.training.best));
  s.write_artifact(stem + ".history.tsv", learners::history_tsv(model.training.history));
  s.write_artifact(stem + ".dev_report.tsv",
                   metrics::report_tsv_header() + "\n" + metrics::report_tsv_row(model.dev_report) + "\n");
  s.write_logprobs(stem + ".logprobs", model.logprobs);
}

pipeline::TrainOptions train_options(const RunConfig& cfg, int prompt) {
  auto o = cfg.train;
  o.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(prompt));
  return o;
}

int cmd_train_features(Session& s) {
  std::vector<metrics::EvalReport> reports;
  for (int p : s.prompts(false)) {
    const auto c = s.corpus_for(p);
    features::FeatureWorkspace ws(c, s.embeddings(), s.cfg().params.tfidf_dim);
    auto model = pipeline::train_feature_model(ws, c, s.cfg().params, train_options(s.cfg(), p));
    model.dev_report = metrics::production_check(model.dev_report, Session::human_qwk(c));
    write_feature_model(s, model, prompt_stem(pipeline::kFeatureModelName, p));
    reports.push_back(model.dev_report);
  }
  s.out() << ensemble::report_tsv(reports);
  return kExitOk;
}

int cmd_tune(Session& s) {
  const auto space = hyperopt::SearchSpace::feature_default();
  std::vector<metrics::EvalReport> reports;
  for (int p : s.prompts(false)) {
    const auto c = s.corpus_for(p);
    const std::string stem = prompt_stem(pipeline::kFeatureModelName, p);
    std::vector<hyperopt::TrialRecord> prior;
    const fs::path log_path = s.out_dir() / (stem + ".study.tsv");
    if (s.cfg().resume && fs::exists(log_path)) prior = hyperopt::parse_study_log(space, textio::read_file(log_path));

    features::FeatureWorkspace ws(c, s.embeddings());
    auto tuned = pipeline::tune_feature_model(ws, c, s.cfg().trials, train_options(s.cfg(), p), prior);
    tuned.model.dev_report = metrics::production_check(tuned.model.dev_report, Session::human_qwk(c));
    s.write_artifact(stem + ".study.tsv", hyperopt::study_log_tsv(space, tuned.study.trials));
    write_feature_model(s, tuned.model, stem);
    reports.push_back(tuned.model.dev_report);
  }
  s.out() << ensemble::report_tsv(reports);
  return kExitOk;
}

int cmd_predict(Session& s) {
  if (s.cfg().model_dir.empty()) fail(Errc::InvalidArgument, "--model is required");
  for (int p : s.prompts(false)) {
    const fs::path stem = fs::path(s.cfg().model_dir) / prompt_stem(pipeline::kFeatureModelName, p);
    const auto spec = features::parse_spec(s.read_input(stem.string() + ".spec"));
    const auto mlp = learners::parse_mlp(s.read_input(stem.string() + ".mlp"));
    std::vector<ScoredResponse> rows;
    for (const auto& r : s.data())
      if (r.prompt_id == p) rows.push_back(r);
    if (rows.empty()) fail(Errc::EmptyInput, "prompt " + std::to_string(p) + " has no responses to score");
    const auto lp = pipeline::predict_logprobs(spec, mlp, rows, p, s.embeddings());
    s.write_logprobs(prompt_stem(pipeline::kFeatureModelName, p) + ".predict.logprobs", lp);
    s.out() << "prompt " << p << ": scored " << rows.size() << " responses\n";
  }
  return kExitOk;
}

// Member log-prob matrices grouped by model name, then prompt.
using MemberTable = std::map<std::string, std::map<int, LogProbMatrix>>;

MemberTable group_members(std::vector<LogProbMatrix> loaded) {
  MemberTable t;
  for (auto& m : loaded) {
    const std::string name = m.model_name;
    const int p = m.prompt_id;
    if (!t[name].emplace(p, std::move(m)).second)
      fail(Errc::DuplicateId, "two log-prob files for model '" + name + "' and prompt " + std::to_string(p));
  }
  return t;
}

const LogProbMatrix& member_for(const MemberTable& t, const std::string& name, int prompt) {
  const auto& per_prompt = t.at(name);
  auto it = per_prompt.find(prompt);
  if (it == per_prompt.end())
    fail(Errc::CoverageGap, "member '" + name + "' has no log-probs for prompt " + std::to_string(prompt));
  return it->second;
}

int cmd_ensemble(Session& s) {
  const int m = s.cfg().m;
  const auto prompts = s.prompts(true);
  const MemberTable table = group_members(s.load_members());
  if (m < 1 || m > static_cast<int>(table.size()))
    fail(Errc::InvalidArgument,
         "--m " + std::to_string(m) + " outside 1.." + std::to_string(table.size()) + " available members");

  std::vector<PromptCorpus> corpora;
  for (int p : prompts) corpora.push_back(s.corpus_for(p));

  std::vector<ensemble::Candidate> candidates;
  for (const auto& [name, per_prompt] : table) {
    ensemble::Candidate cand{name, {}};
    for (const auto& c : corpora) {
      const auto& lp = member_for(table, name, c.prompt_id);
      corpus::validate_logprobs(lp, c);
      const auto pred = ensemble::member_predictions(lp, c.ids(c.dev));
      cand.dev_reports.push_back(ensemble::evaluate_run(pred, c, c.dev));
    }
    candidates.push_back(std::move(cand));
  }
  const auto chosen = ensemble::select_best_subset(candidates, m);
  const std::string name = "ensemble_best" + std::to_string(m);

  std::vector<metrics::EvalReport> reports;
  std::string used_split;
  for (const auto& c : corpora) {
    std::vector<LogProbMatrix> members;
    for (const auto& n : chosen) members.push_back(member_for(table, n, c.prompt_id));
    const auto spec = ensemble::fit_ensemble(members, c);

    std::vector<std::string> ids = c.ids(c.dev);
    const auto test_ids = c.ids(c.test);
    ids.insert(ids.end(), test_ids.begin(), test_ids.end());
    const auto pred = ensemble::score_ensemble(spec, members, ids);

    const auto split = eval_split(c, s.cfg().split);
    const std::size_t offset = split.data() == c.dev.data() ? 0 : c.dev.size();
    const std::vector<int> labels(pred.labels.begin() + static_cast<std::ptrdiff_t>(offset),
                                  pred.labels.begin() + static_cast<std::ptrdiff_t>(offset + split.size()));
    reports.push_back(ensemble::evaluate_run(labels, c, split, Session::human_qwk(c)));
    used_split = split_name(c, split);

    s.write_artifact(prompt_stem(name, c.prompt_id) + ".ensemble", ensemble::serialize_ensemble(spec));
    s.write_logprobs(prompt_stem(name, c.prompt_id) + ".logprobs", ensemble::to_logprob_matrix(pred, name, c.prompt_id));
  }
  std::string members_line = "# members=";
  for (std::size_t i = 0; i < chosen.size(); ++i) members_line += (i ? "," : "") + chosen[i];
  const std::string body = members_line + " split=" + used_split + "\n" + ensemble::report_tsv(reports);
  s.write_artifact(name + ".report.tsv", body);
  s.out() << body;
  return kExitOk;
}

int cmd_report(Session& s) {
  const auto prompts = s.prompts(true);
  const MemberTable table = group_members(s.load_members());
  std::vector<PromptCorpus> corpora;
  for (int p : prompts) corpora.push_back(s.corpus_for(p));

  // One row per model and prompt; member names come out sorted.
  std::map<std::string, std::vector<metrics::EvalReport>> rows;
  std::string used_split;
  for (const auto& [name, per_prompt] : table) {
    for (const auto& c : corpora) {
      const auto& lp = member_for(table, name, c.prompt_id);
      corpus::validate_logprobs(lp, c);
      const auto split = eval_split(c, s.cfg().split);
      used_split = split_name(c, split);
      const auto pred = ensemble::member_predictions(lp, c.ids(split));
      rows[name].push_back(ensemble::evaluate_run(pred, c, split, Session::human_qwk(c)));
    }
  }

  std::ostringstream os;
  os << "# split=" << used_split << '\n';
  for (auto metric : textio::split(s.cfg().metric, ',')) {
    metric = textio::trim(metric);
    if (metric != "qwk" && metric != "smd" && metric != "acc")
      fail(Errc::InvalidArgument, "--metric accepts qwk, smd, acc; got '" + std::string(metric) + "'");
    os << "# metric=" << metric << '\n' << "model";
    for (int p : prompts) os << '\t' << p;
    os << "\tmean\tflagged\n";
    for (const auto& [name, reports] : rows) {
      os << name;
      double total = 0.0;
      int flagged = 0;
      for (const auto& r : reports) {
        const double v = metric == "qwk" ? r.qwk : metric == "smd" ? r.smd : r.accuracy;
        total += v;
        flagged += r.flags.smd_violation || r.flags.qwk_degradation;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", v);
        os << '\t' << buf;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", total / static_cast<double>(reports.size()));
      os << '\t' << buf << '\t' << flagged << '\n';
    }
  }
  if (!s.cfg().out.empty()) s.write_artifact("report.tsv", os.str());
  s.out() << os.str();
  return kExitOk;
}

}  // namespace

int exit_code(Errc code) {
  switch (code) {
    case Errc::AllTrialsFailed: return kExitAllTrialsFailed;
    case Errc::CoverageGap: return kExitCoverageGap;
    default: return kExitValidation;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Short answer scoring pipeline", "asas"};
  app.fallthrough();
  app.require_subcommand(1);
  app.allow_config_extras(false);
  app.set_config("--config", "asas.conf", "key = value settings file");
  app.set_version_flag("--version", ASAS_VERSION);

  app.add_option("--data", cfg.data, "training TSV");
  app.add_option("--test", cfg.test, "test TSV");
  app.add_option("--solution", cfg.solution, "test score key (CSV or TSV)");
  app.add_option("--prompts-dir", cfg.prompts_dir, "directory of <prompt>.txt prompt texts");
  app.add_option("--embeddings", cfg.embeddings, "precomputed response embeddings");
  app.add_option("--members", cfg.members, "log-prob files or directories")->delimiter(',');
  app.add_option("--model", cfg.model_dir, "directory holding a trained feature model");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--prompt", cfg.prompt, "prompt id");
  app.add_flag("--all-prompts", cfg.all_prompts, "loop over every prompt in --data");
  app.add_option("--dev-frac", cfg.dev_frac, "dev fraction")->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--trials", cfg.trials, "TPE trials")->check(CLI::PositiveNumber);
  app.add_option("--m", cfg.m, "ensemble size");
  app.add_flag("--resume", cfg.resume, "continue an existing study log");
  app.add_option("--split", cfg.split, "auto, dev or test");
  app.add_option("--metric", cfg.metric, "comma list of qwk, smd, acc");
  app.add_option("--lr", cfg.params.learning_rate, "learning rate")->check(CLI::PositiveNumber);
  app.add_option("--batch", cfg.params.batch_size, "batch size")->check(CLI::PositiveNumber);
  app.add_option("--tfidf-dim", cfg.params.tfidf_dim, "TF-IDF projection dimension")
      ->check(CLI::Range(features::kMinTfidfDim, features::kMaxTfidfDim));
  app.add_option("--cutoff", cfg.params.cutoff, "near-match cutoff")
      ->check(CLI::Range(features::kMinCutoff, features::kMaxCutoff));
  app.add_option("--epochs", cfg.train.epochs, "training epochs")->check(CLI::PositiveNumber);
  app.add_option("--hidden", cfg.train.hidden, "MLP hidden width")->check(CLI::PositiveNumber);
  app.add_option("--weight-decay", cfg.train.weight_decay, "AdamW weight decay")->check(CLI::NonNegativeNumber);

  using Handler = int (*)(Session&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"ingest", "validate a dataset and summarize prompts", cmd_ingest},
      {"stats", "per-prompt split sizes, human agreement and length", cmd_stats},
      {"split", "write the train/dev/test assignment", cmd_split},
      {"train-features", "train the feature model with fixed hyperparameters", cmd_train_features},
      {"tune", "TPE study over feature-model hyperparameters", cmd_tune},
      {"predict", "score responses with a trained feature model", cmd_predict},
      {"ensemble", "select the best members on dev and fit the stacker", cmd_ensemble},
      {"report", "per-prompt metric tables for member log-prob files", cmd_report},
  };
  std::map<const CLI::App*, Handler> handlers;
  for (const auto& [name, help, fn] : commands) handlers[app.add_subcommand(name, help)] = fn;

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (dynamic_cast<const CLI::CallForVersion*>(&e)) {
      out << e.what() << '\n';
      return kExitOk;
    }
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return kExitOk;
    }
    err << "asas: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    Session session(cfg, out);
    return handlers.at(app.get_subcommands().front())(session);
  } catch (const Error& e) {
    err << "asas: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "asas: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace asas::cli
