#include "icx/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "icx/cell.hpp"
#include "icx/document.hpp"
#include "icx/errors.hpp"
#include "icx/html.hpp"
#include "icx/http_client.hpp"
#include "icx/metrics.hpp"
#include "icx/mexgen.hpp"
#include "icx/mock_server.hpp"
#include "icx/objective.hpp"
#include "icx/prompts.hpp"
#include "icx/token_highlighter.hpp"

namespace icx::cli {

using nlohmann::json;

namespace {

// Input problems the user can fix by changing the command line or files.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error("UsageError", msg) {}
};

struct Common {
  std::string endpoint;
  std::string api_key_env = "ICX_API_KEY";
  std::uint64_t seed = 0;
  std::optional<std::int64_t> budget;
  std::string output;
  std::string html;
  std::string timestamp;
  int max_tokens = 256;
};

void add_common(CLI::App* cmd, Common& c, bool needs_endpoint) {
  if (needs_endpoint) {
    cmd->add_option("--endpoint", c.endpoint, "Base URL of the OpenAI-compatible backend (env ICX_ENDPOINT)");
    cmd->add_option("--api-key-env", c.api_key_env, "Environment variable holding the bearer token")
        ->capture_default_str();
    cmd->add_option("--max-tokens", c.max_tokens, "Generation length cap")->capture_default_str();
  }
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--budget", c.budget, "Maximum number of backend queries");
  cmd->add_option("--output,-o", c.output, "Write the JSON document here (default stdout)");
  cmd->add_option("--html", c.html, "Also write an HTML report here");
  cmd->add_option("--timestamp", c.timestamp, "Timestamp recorded in the document ('now' for the clock)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << bytes)) throw UsageError("cannot write '" + path + "'");
}

std::string resolve_endpoint(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ICX_ENDPOINT"); env != nullptr && *env != '\0') return env;
  throw UsageError("no endpoint: pass --endpoint or set ICX_ENDPOINT");
}

std::unique_ptr<OpenAIClient> make_client(const std::string& endpoint, const Common& c) {
  HttpClientOptions o;
  o.endpoint = endpoint;
  o.api_key = api_key_from_env(c.api_key_env);
  return std::make_unique<OpenAIClient>(std::move(o));
}

void emit(const report::ExplanationDocument& doc, const Common& c, std::ostream& out) {
  const std::string bytes = report::serialize(doc);
  if (c.output.empty()) out << bytes;
  else write_file(c.output, bytes);
  if (!c.html.empty()) write_file(c.html, report::render_html(doc));
}

std::vector<Level> parse_levels(const std::string& csv) {
  std::vector<Level> levels;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      levels.push_back(parse_level(std::string(trim(item))));
    } catch (const PreconditionError& e) {
      throw UsageError(e.what());
    }
  }
  if (levels.empty()) throw UsageError("--levels is empty");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (static_cast<int>(levels[i]) <= static_cast<int>(levels[i - 1])) {
      throw UsageError("--levels must go from coarse to fine");
    }
  }
  return levels;
}

ScalarizerSpec parse_scalarizer(const std::string& name) {
  try {
    return ScalarizerSpec::parse(name);
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
}

// --- explain mexgen ---------------------------------------------------------

struct MexgenArgs {
  Common c;
  std::string method = "clime";
  std::string input;
  std::string scalarizer = "logprob";
  std::string levels = "sentence,word";
  std::string judge_endpoint;
  std::size_t top_k = 2;
  std::size_t samples = 0;
  std::size_t k_max = 2;
  double sigma = 0.25;
  bool exhaustive = false;
  std::size_t radius = 2;
  int workers = 1;
};

int explain_mexgen(const MexgenArgs& a, std::ostream& out) {
  mexgen::MultilevelConfig cfg;
  if (a.method == "clime") cfg.method = mexgen::Method::clime;
  else if (a.method == "lshap") cfg.method = mexgen::Method::lshap;
  else throw UsageError("--method must be clime or lshap");
  cfg.levels = parse_levels(a.levels);
  cfg.top_k = a.top_k;
  cfg.seed = a.c.seed;
  cfg.workers = a.workers;
  cfg.clime.n_samples = a.samples;
  cfg.clime.k_max = a.k_max;
  cfg.clime.sigma = a.sigma;
  cfg.clime.exhaustive = a.exhaustive;
  cfg.lshap.radius = a.radius;
  cfg.gen.max_tokens = a.c.max_tokens;
  cfg.gen.seed = static_cast<std::int64_t>(a.c.seed);
  const ScalarizerSpec spec = parse_scalarizer(a.scalarizer);

  const std::string text = read_file(a.input);
  const std::string endpoint = resolve_endpoint(a.c.endpoint);
  auto model = make_client(endpoint, a.c);
  std::unique_ptr<OpenAIClient> judge;
  if (!a.judge_endpoint.empty()) judge = make_client(a.judge_endpoint, a.c);
  LanguageModel* aux = judge ? judge.get() : nullptr;
  if (a.c.budget) {
    auto meter = std::make_shared<BudgetMeter>(*a.c.budget);
    model->attach_meter(meter);
    if (judge) judge->attach_meter(meter);
  }
  require_capabilities(spec, *model, aux);

  const auto result = mexgen::multilevel_explain(text, *model, spec, cfg, aux);
  json params = {{"levels", a.levels}, {"top_k", a.top_k}, {"max_tokens", a.c.max_tokens}};
  if (cfg.method == mexgen::Method::clime) {
    params["n_samples"] = a.samples;
    params["k_max"] = a.k_max;
    params["sigma"] = a.sigma;
    params["exhaustive"] = a.exhaustive;
  } else {
    params["radius"] = a.radius;
  }
  if (a.c.budget) params["budget"] = *a.c.budget;
  if (!a.judge_endpoint.empty()) params["judge_endpoint"] = a.judge_endpoint;
  emit(report::from_attribution(result, endpoint, std::move(params), resolve_timestamp(a.c.timestamp)), a.c, out);
  return kExitOk;
}

// --- explain cell -------------------------------------------------------------

struct CellArgs {
  Common c;
  std::string input;
  std::string scalarizer = "cell-bleu";
  std::string infiller_endpoint;
  std::string judge_endpoint;
  bool myopic = false;
  cell::CellParams p;
};

int explain_cell(CellArgs a, std::ostream& out) {
  const ScalarizerSpec spec = [&] {
    auto s = parse_scalarizer(a.scalarizer);
    s.lambda_edit = a.p.lambda_edit;
    return s;
  }();
  if (a.c.budget) a.p.budget = *a.c.budget;
  a.p.gen.max_tokens = a.c.max_tokens;
  a.p.gen.seed = static_cast<std::int64_t>(a.c.seed);

  const std::string text = read_file(a.input);
  const std::string endpoint = resolve_endpoint(a.c.endpoint);
  auto model = make_client(endpoint, a.c);
  std::unique_ptr<OpenAIClient> infiller, judge;
  if (!a.infiller_endpoint.empty()) infiller = make_client(a.infiller_endpoint, a.c);
  if (!a.judge_endpoint.empty()) judge = make_client(a.judge_endpoint, a.c);
  cell::Backends backends{*model, infiller.get(), judge.get()};

  const auto result = a.myopic ? cell::mcell_explain(text, backends, spec, a.p, a.c.seed)
                               : cell::cell_explain(text, backends, spec, a.p, a.c.seed);
  json params = {{"scalarizer", spec.name()}, {"budget", a.p.budget},       {"span", a.p.span},
                 {"infills", a.p.infills},    {"threshold", a.p.threshold}, {"max_edits", a.p.max_edits},
                 {"lambda_edit", a.p.lambda_edit}, {"max_new_tokens", a.p.max_new_tokens},
                 {"max_tokens", a.c.max_tokens}};
  if (!a.infiller_endpoint.empty()) params["infiller_endpoint"] = a.infiller_endpoint;
  if (!a.judge_endpoint.empty()) params["judge_endpoint"] = a.judge_endpoint;
  emit(report::from_contrastive(result, a.myopic, endpoint, a.c.seed, std::move(params),
                                resolve_timestamp(a.c.timestamp)),
       a.c, out);
  return kExitOk;
}

// --- explain token-highlighter ----------------------------------------------

struct ThArgs {
  Common c;
  std::string backend = "toy";
  std::string input, response;
  std::string input_text, response_text;
  std::string level = "word";
  std::size_t dim = 16;
  double decay = 0.7;
};

int explain_th(const ThArgs& a, std::ostream& out) {
  if (a.backend != "toy") throw UsageError("only the 'toy' backend is available");
  const std::string input = !a.input_text.empty() ? a.input_text : a.input.empty() ? "" : read_file(a.input);
  const std::string response =
      !a.response_text.empty() ? a.response_text : a.response.empty() ? "" : read_file(a.response);
  if (input.empty()) throw UsageError("no input: pass --input FILE or --input-text");
  Level level;
  try {
    level = parse_level(a.level);
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
  th::ToyLmConfig cfg;
  cfg.dim = a.dim;
  cfg.context_decay = a.decay;
  const th::ToyLM lm({input, response}, a.c.seed, cfg);
  const th::ToyLmProvider provider(lm);
  const auto result = th::highlight(input, response, provider, level);
  json params = {{"backend", a.backend}, {"level", a.level}, {"dim", a.dim}, {"context_decay", a.decay}};
  emit(report::from_saliency(input, response, result, a.c.seed, std::move(params), resolve_timestamp(a.c.timestamp)),
       a.c, out);
  return kExitOk;
}

// --- eval perturb-curve -------------------------------------------------------

struct CurveArgs {
  Common c;
  std::string attribution;
  std::string scalarizer = "logprob";
  std::string judge_endpoint;
  std::size_t random_baselines = 5;
  std::optional<std::size_t> k;
  std::string replacement;
  int workers = 1;
};

json curve_json(const metrics::PerturbationCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"k", p.k}, {"value", std::isfinite(p.value) ? json(p.value) : json(nullptr)}});
  }
  return {{"ordering", curve.ordering},
          {"points", std::move(points)},
          {"normalized_area", curve.normalized_area},
          {"truncated", curve.truncated}};
}

int eval_curve(const CurveArgs& a, std::ostream& out) {
  const auto doc = report::parse(read_file(a.attribution));
  const ScalarizerSpec spec = parse_scalarizer(a.scalarizer);
  const std::string endpoint = resolve_endpoint(a.c.endpoint);
  auto model = make_client(endpoint, a.c);
  std::unique_ptr<OpenAIClient> judge;
  if (!a.judge_endpoint.empty()) judge = make_client(a.judge_endpoint, a.c);
  LanguageModel* aux = judge ? judge.get() : nullptr;
  if (a.c.budget) {
    auto meter = std::make_shared<BudgetMeter>(*a.c.budget);
    model->attach_meter(meter);
    if (judge) judge->attach_meter(meter);
  }
  require_capabilities(spec, *model, aux);

  GenParams gen;
  gen.max_tokens = a.c.max_tokens;
  gen.seed = static_cast<std::int64_t>(a.c.seed);
  const Objective objective(*model, spec, doc.input, doc.output, aux, gen);
  const metrics::TextValueFn value = [&](std::string_view text) { return objective(text); };
  const auto policy = a.replacement.empty() ? ReplacementPolicy::remove() : ReplacementPolicy::fixed(a.replacement);
  const auto units = report::root_spans(doc);

  const auto attr = metrics::perturb_curve(doc.input, units, report::root_scores(doc), value, a.k, policy, a.workers);
  std::vector<metrics::PerturbationCurve> random;
  for (std::size_t i = 0; i < a.random_baselines; ++i) {
    random.push_back(metrics::random_curve(doc.input, units, value, a.c.seed + i, a.k, policy, a.workers));
  }
  const auto cmp = metrics::compare_orderings(attr, random);

  json rnd = json::array();
  for (const auto& r : random) rnd.push_back(curve_json(r));
  json j = {{"attribution_method", doc.method},
            {"endpoint", endpoint},
            {"scalarizer", spec.name()},
            {"seed", a.c.seed},
            {"attribution", curve_json(attr)},
            {"random", std::move(rnd)},
            {"area_attr", cmp.area_attr},
            {"mean_area_random", cmp.mean_area_random},
            {"no_random_baselines", cmp.no_random_baselines},
            {"n_queries", model->requests_sent() + (judge ? judge->requests_sent() : 0)},
            {"timestamp", resolve_timestamp(a.c.timestamp)}};
  const std::string bytes = j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
  if (a.c.output.empty()) out << bytes;
  else write_file(a.c.output, bytes);
  return kExitOk;
}

// --- mock-server --------------------------------------------------------------

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct MockArgs {
  int port = 8080;
  std::string behavior = "echo";
  std::uint64_t seed = 0;
  bool no_score = false;
  bool no_embed = false;
  std::string host = "127.0.0.1";
};

int mock_server(const MockArgs& a, std::ostream& out) {
  mock::MockOptions o;
  try {
    o.behavior = mock::MockBehavior::parse(a.behavior);
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
  o.seed = a.seed;
  o.can_score = !a.no_score;
  o.can_embed = !a.no_embed;
  o.host = a.host;
  mock::MockServer server(o);
  server.start(a.port);
  out << "listening on " << server.endpoint() << std::endl;

  g_stop.store(false);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread watcher([&server] {
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  server.wait();
  g_stop.store(true);
  watcher.join();
  return kExitOk;
}

bool is_usage_kind(const std::string& kind) {
  return kind == "UsageError" || kind == "SchemaError" || kind == "PreconditionError" || kind == "EmptyInput" ||
         kind == "InvalidLevelOrder";
}

}  // namespace

std::string resolve_timestamp(const std::string& flag) {
  auto iso = [](std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
  };
  if (flag == "now") return iso(std::time(nullptr));
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env != nullptr && *env != '\0') {
    try {
      return iso(static_cast<std::time_t>(std::stoll(env)));
    } catch (const std::exception&) {
    }
  }
  return iso(0);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explain LLM outputs in terms of their inputs", "icx"};
  app.require_subcommand(0, 1);
  bool show_prompts = false;
  app.add_flag("--show-prompts", show_prompts, "Print the judge and infill prompt templates");

  auto* explain = app.add_subcommand("explain", "Produce an explanation document");
  explain->require_subcommand(1);

  MexgenArgs mx;
  auto* mx_cmd = explain->add_subcommand("mexgen", "Multi-level perturbation attribution");
  add_common(mx_cmd, mx.c, true);
  mx_cmd->add_option("--method", mx.method, "clime or lshap")->capture_default_str();
  mx_cmd->add_option("--input", mx.input, "File holding the input text")->required();
  mx_cmd->add_option("--scalarizer", mx.scalarizer, "logprob, text-sim:{bleu,unigram-f1,embed-cosine}, preference, contradiction, nli")
      ->capture_default_str();
  mx_cmd->add_option("--levels", mx.levels, "Comma-separated levels, coarse to fine")->capture_default_str();
  mx_cmd->add_option("--top-k", mx.top_k, "Units refined per level")->capture_default_str();
  mx_cmd->add_option("--samples", mx.samples, "C-LIME samples per level (0: 4 per unit)")->capture_default_str();
  mx_cmd->add_option("--k-max", mx.k_max, "Most units perturbed per C-LIME sample")->capture_default_str();
  mx_cmd->add_option("--sigma", mx.sigma, "C-LIME kernel width")->capture_default_str();
  mx_cmd->add_flag("--exhaustive", mx.exhaustive, "C-LIME over all masks");
  mx_cmd->add_option("--radius", mx.radius, "L-SHAP neighborhood radius")->capture_default_str();
  mx_cmd->add_option("--judge-endpoint", mx.judge_endpoint, "Separate judge / embedding backend");
  mx_cmd->add_option("--workers", mx.workers, "Concurrent evaluations")->capture_default_str();

  CellArgs ce;
  auto* ce_cmd = explain->add_subcommand("cell", "Budgeted contrastive prompt search");
  add_common(ce_cmd, ce.c, true);
  ce_cmd->add_option("--input", ce.input, "File holding the prompt")->required();
  ce_cmd->add_option("--scalarizer", ce.scalarizer, "cell-bleu, preference, contradiction or nli")
      ->capture_default_str();
  ce_cmd->add_flag("--myopic", ce.myopic, "Exhaustive per-word search (mCELL)");
  ce_cmd->add_option("--infiller-endpoint", ce.infiller_endpoint, "Separate infilling backend");
  ce_cmd->add_option("--judge-endpoint", ce.judge_endpoint, "Separate judge backend");
  ce_cmd->add_option("--span", ce.p.span, "Words per edit window")->capture_default_str();
  ce_cmd->add_option("--infills", ce.p.infills, "Candidates per expanded window")->capture_default_str();
  ce_cmd->add_option("--threshold", ce.p.threshold, "Contrast score counted as success")->capture_default_str();
  ce_cmd->add_option("--max-edits", ce.p.max_edits)->capture_default_str();
  ce_cmd->add_option("--lambda-edit", ce.p.lambda_edit, "cell-bleu edit penalty")->capture_default_str();
  ce_cmd->add_option("--max-new-tokens", ce.p.max_new_tokens, "Infill length cap")->capture_default_str();

  ThArgs th;
  auto* th_cmd = explain->add_subcommand("token-highlighter", "Gradient-norm token saliency");
  add_common(th_cmd, th.c, false);
  th_cmd->add_option("--backend", th.backend, "Gradient backend")->capture_default_str();
  th_cmd->add_option("--input", th.input, "File holding the input");
  th_cmd->add_option("--response", th.response, "File holding the response to explain");
  th_cmd->add_option("--input-text", th.input_text, "Input given inline");
  th_cmd->add_option("--response-text", th.response_text, "Response given inline");
  th_cmd->add_option("--level", th.level, "word, phrase or sentence")->capture_default_str();
  th_cmd->add_option("--dim", th.dim, "ToyLM embedding size")->capture_default_str();
  th_cmd->add_option("--decay", th.decay, "ToyLM context decay")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Evaluate an explanation document");
  eval->require_subcommand(1);
  CurveArgs cv;
  auto* cv_cmd = eval->add_subcommand("perturb-curve", "Perturbation curve of a document's root units");
  add_common(cv_cmd, cv.c, true);
  cv_cmd->add_option("--attribution", cv.attribution, "Explanation document")->required();
  cv_cmd->add_option("--scalarizer", cv.scalarizer)->capture_default_str();
  cv_cmd->add_option("--judge-endpoint", cv.judge_endpoint, "Separate judge / embedding backend");
  cv_cmd->add_option("--random-baselines", cv.random_baselines, "Random orderings to compare with")
      ->capture_default_str();
  cv_cmd->add_option("--k", cv.k, "Units to perturb (default all)");
  cv_cmd->add_option("--replacement", cv.replacement, "Fixed replacement string (default: delete)");
  cv_cmd->add_option("--workers", cv.workers, "Concurrent evaluations")->capture_default_str();

  MockArgs mk;
  auto* mk_cmd = app.add_subcommand("mock-server", "Deterministic OpenAI-compatible test server");
  mk_cmd->add_option("--port", mk.port, "0 picks a free port")->capture_default_str();
  mk_cmd->add_option("--behavior", mk.behavior, "echo, copy-sentence:K, trigger:W,HIT,MISS or judge:RULE")
      ->capture_default_str();
  mk_cmd->add_option("--seed", mk.seed)->capture_default_str();
  mk_cmd->add_option("--host", mk.host)->capture_default_str();
  mk_cmd->add_flag("--no-score", mk.no_score, "Disable /v1/completions");
  mk_cmd->add_flag("--no-embed", mk.no_embed, "Disable /v1/embeddings");

  // CLI11 wants argv order reversed when given a vector.
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "icx: usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (show_prompts) out << prompts::describe_all();
  try {
    if (*mx_cmd) return explain_mexgen(mx, out);
    if (*ce_cmd) return explain_cell(ce, out);
    if (*th_cmd) return explain_th(th, out);
    if (*cv_cmd) return eval_curve(cv, out);
    if (*mk_cmd) return mock_server(mk, out);
  } catch (const Error& e) {
    err << "icx: error: " << e.kind() << ": " << e.what() << "\n";
    return is_usage_kind(e.kind()) ? kExitUsage : kExitBackend;
  } catch (const std::exception& e) {
    err << "icx: error: " << e.what() << "\n";
    return kExitBackend;
  }
  if (show_prompts) return kExitOk;
  err << "icx: usage error: a subcommand is required\n" << app.help();
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace icx::cli
