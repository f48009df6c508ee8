// Copyright 2026 The ADP-SGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <type_traits>

#include "adpsgd/errors.h"
#include "adpsgd/harness.h"

namespace adpsgd {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::string_view kSingleArmId = "main";

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> SplitList(std::string_view s) {
  std::vector<std::string> out;
  if (Trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    const auto item = Trim(s.substr(start, comma == std::string_view::npos
                                               ? std::string_view::npos
                                               : comma - start));
    if (item.empty()) throw ConfigError("empty entry in list '" + std::string(s) + "'");
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename Seq>
std::string JoinList(const Seq& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_same_v<std::decay_t<decltype(item)>, double>) {
      out += FormatDouble(item);
    } else if constexpr (std::is_arithmetic_v<std::decay_t<decltype(item)>>) {
      out += std::to_string(item);
    } else {
      out += item;
    }
  }
  return out;
}

double ToDouble(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
  }
  return out;
}

template <typename Int>
Int ToInt(const std::string& key, const std::string& value) {
  Int out = 0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as an integer");
  }
  return out;
}

// Tracks which keys were read so that unknown keys can be reported.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  const std::string* Find(const std::string& key) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }
  std::optional<double> OptDouble(const std::string& key) {
    const std::string* v = Find(key);
    if (!v) return std::nullopt;
    return ToDouble(key, *v);
  }
  double Double(const std::string& key, double fallback) {
    return OptDouble(key).value_or(fallback);
  }
  template <typename Int>
  Int Integer(const std::string& key, Int fallback) {
    const std::string* v = Find(key);
    return v ? ToInt<Int>(key, *v) : fallback;
  }
  std::string String(const std::string& key, const std::string& fallback) {
    const std::string* v = Find(key);
    return v ? *v : fallback;
  }
  void RejectUnused() const {
    for (const auto& [key, value] : kv_) {
      if (!used_.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
    }
  }

 private:
  const KeyValues& kv_;
  std::set<std::string> used_;
};

[[noreturn]] void BadChoice(const std::string& key, const std::string& value,
                            const char* choices) {
  throw ConfigError("key '" + key + "': '" + value + "' is not one of " + choices);
}

StepsizeSchedule ReadStep(Reader& r, const std::string& prefix) {
  const std::string kind_key = prefix + "schedule.step.kind";
  const std::string kind = r.String(kind_key, "constant");
  auto key = [&](const char* suffix) { return prefix + "schedule.step." + suffix; };
  if (kind == "constant") {
    return ConstantStep{r.Double(key("b"), ConstantStep{}.b)};
  }
  if (kind == "poly") {
    const PolynomialDecayStep defaults;
    return PolynomialDecayStep{r.Double(key("a"), defaults.a),
                               r.Double(key("c"), defaults.c)};
  }
  if (kind == "adagrad") {
    AdaGradNormStep step;
    step.b0 = r.Double(key("b0"), step.b0);
    step.nu = r.Double(key("nu"), step.nu);
    const std::string boost = r.String(key("boost"), "none");
    if (boost == "cyclic") {
      GradientBoost b;
      b.beta = r.Double(key("beta"), b.beta);
      b.period = r.Integer<std::int64_t>(key("period"), b.period);
      step.boost = b;
    } else if (boost == "sequence") {
      GradientBoost b;
      const std::string* seq = r.Find(key("boost_sequence"));
      if (!seq) throw ConfigError("boost=sequence needs " + key("boost_sequence"));
      for (const auto& item : SplitList(*seq)) {
        b.sequence.push_back(ToDouble(key("boost_sequence"), item));
      }
      step.boost = b;
    } else if (boost != "none") {
      BadChoice(key("boost"), boost, "none|cyclic|sequence");
    }
    return step;
  }
  BadChoice(kind_key, kind, "constant|poly|adagrad");
}

NoiseScaleSchedule ReadNoise(Reader& r, const std::string& prefix) {
  const std::string kind_key = prefix + "noise.kind";
  const std::string kind = r.String(kind_key, "one");
  if (kind == "one") return ConstantOneNoise{};
  if (kind == "sqrt_b") return SqrtOfBNoise{};
  if (kind == "poly_quarter") {
    PolynomialQuarterNoise noise;
    noise.b0_sq = r.Double(prefix + "noise.b0_sq", noise.b0_sq);
    noise.C = r.Double(prefix + "noise.C", noise.C);
    return noise;
  }
  BadChoice(kind_key, kind, "one|sqrt_b|poly_quarter");
}

void WriteStep(KeyValues& kv, const std::string& prefix, const StepsizeSchedule& step) {
  auto key = [&](const char* suffix) { return prefix + "schedule.step." + suffix; };
  std::visit(Overloaded{
                 [&](const ConstantStep& s) {
                   kv[key("kind")] = "constant";
                   kv[key("b")] = FormatDouble(s.b);
                 },
                 [&](const PolynomialDecayStep& s) {
                   kv[key("kind")] = "poly";
                   kv[key("a")] = FormatDouble(s.a);
                   kv[key("c")] = FormatDouble(s.c);
                 },
                 [&](const AdaGradNormStep& s) {
                   kv[key("kind")] = "adagrad";
                   kv[key("b0")] = FormatDouble(s.b0);
                   kv[key("nu")] = FormatDouble(s.nu);
                   if (!s.boost) {
                     kv[key("boost")] = "none";
                   } else if (!s.boost->sequence.empty()) {
                     kv[key("boost")] = "sequence";
                     kv[key("boost_sequence")] = JoinList(s.boost->sequence);
                   } else {
                     kv[key("boost")] = "cyclic";
                     kv[key("beta")] = FormatDouble(s.boost->beta);
                     kv[key("period")] = std::to_string(s.boost->period);
                   }
                 },
             },
             step);
}

void WriteNoise(KeyValues& kv, const std::string& prefix, const NoiseScaleSchedule& noise) {
  std::visit(Overloaded{
                 [&](const ConstantOneNoise&) { kv[prefix + "noise.kind"] = "one"; },
                 [&](const SqrtOfBNoise&) { kv[prefix + "noise.kind"] = "sqrt_b"; },
                 [&](const PolynomialQuarterNoise& n) {
                   kv[prefix + "noise.kind"] = "poly_quarter";
                   kv[prefix + "noise.b0_sq"] = FormatDouble(n.b0_sq);
                   kv[prefix + "noise.C"] = FormatDouble(n.C);
                 },
             },
             noise);
}

void CheckArmId(const std::string& id) {
  if (id.empty()) throw ConfigError("arm id must be non-empty");
  for (char ch : id) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '_' || ch == '-';
    if (!ok) throw ConfigError("arm id '" + id + "' may only use [A-Za-z0-9_-]");
  }
}

}  // namespace

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw NumericalError("cannot format number");
  return std::string(buf, ptr);
}

const std::vector<ConfigKey>& ConfigKeys() {
  static const std::vector<ConfigKey> keys = {
      {"data.source", "synthetic|csv"},
      {"data.path", "CSV file with header f0..f{p-1},label"},
      {"data.n", "synthetic sample count"},
      {"data.p", "synthetic feature count"},
      {"data.kind", "synthetic label model: linreg|logreg"},
      {"data.noise", "label noise standard deviation (linreg)"},
      {"data.seed", "synthetic data seed"},
      {"model.kind", "linreg|logreg|mlp"},
      {"model.layers", "MLP layer widths including input and output, e.g. 10,16,1"},
      {"model.activation", "MLP activation: tanh|relu"},
      {"model.loss", "MLP loss: squared|logistic"},
      {"optimizer.eta", "base stepsize eta"},
      {"optimizer.T", "iteration count"},
      {"optimizer.m", "mini-batch size"},
      {"optimizer.clip", "gradient clipping radius C_G"},
      {"optimizer.G", "gradient bound G used for calibration (defaults to clip)"},
      {"optimizer.b_update", "gradient norm driving AdaGrad-Norm: clipped|raw"},
      {"optimizer.full_grad_every", "evaluate the full gradient every k iterations"},
      {"privacy.eps", "target epsilon"},
      {"privacy.delta", "target delta"},
      {"privacy.sigma", "explicit noise standard deviation (skips calibration)"},
      {"privacy.delta0", "per-step failure probability override"},
      {"privacy.delta_prime", "composition slack override"},
      {"schedule.step.kind", "constant|poly|adagrad (single-arm form)"},
      {"schedule.step.b", "constant denominator b"},
      {"schedule.step.a", "polynomial decay a in b_t = sqrt(a + c t)"},
      {"schedule.step.c", "polynomial decay c"},
      {"schedule.step.b0", "AdaGrad-Norm initial b"},
      {"schedule.step.nu", "AdaGrad-Norm floor nu"},
      {"schedule.step.boost", "AdaGrad-Norm gradient boost: none|cyclic|sequence"},
      {"schedule.step.beta", "cyclic boost peak beta"},
      {"schedule.step.period", "cyclic boost period"},
      {"schedule.step.boost_sequence", "explicit boost values beta_t"},
      {"noise.kind", "one|sqrt_b|poly_quarter (single-arm form)"},
      {"noise.b0_sq", "poly_quarter b0^2"},
      {"noise.C", "poly_quarter growth C"},
      {"arms", "comma-separated arm ids; each uses arm.<id>.schedule.step.* and arm.<id>.noise.*"},
      {"seeds", "comma-separated master seeds"},
      {"output.dir", "report directory"},
      {"parallel.workers", "worker threads"},
      {"bounds.L", "smoothness override for bound evaluation"},
      {"bounds.G", "gradient bound override for bound evaluation"},
      {"bounds.D_F", "initial gap override for bound evaluation"},
  };
  return keys;
}

KeyValues ParseKeyValues(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto line = Trim(text.substr(
        start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    ++line_no;
    if (!line.empty() && line.front() != '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      }
      const std::string key(Trim(line.substr(0, eq)));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'");
      kv[key] = std::string(Trim(line.substr(eq + 1)));
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return kv;
}

ExperimentConfig ConfigFromKeyValues(const KeyValues& kv) {
  Reader r(kv);
  ExperimentConfig config;

  DataSpec& data = config.data;
  const std::string source = r.String("data.source", "synthetic");
  if (source == "synthetic") {
    data.source = DataSpec::Source::kSynthetic;
  } else if (source == "csv") {
    data.source = DataSpec::Source::kCsv;
  } else {
    BadChoice("data.source", source, "synthetic|csv");
  }
  data.path = r.String("data.path", "");
  data.n = r.Integer<std::int64_t>("data.n", data.n);
  data.p = r.Integer<std::int64_t>("data.p", data.p);
  const std::string data_kind = r.String("data.kind", "linreg");
  if (data_kind == "linreg") {
    data.kind = SyntheticKind::kLinreg;
  } else if (data_kind == "logreg") {
    data.kind = SyntheticKind::kLogreg;
  } else {
    BadChoice("data.kind", data_kind, "linreg|logreg");
  }
  data.noise = r.Double("data.noise", data.noise);
  data.seed = r.Integer<std::uint64_t>("data.seed", data.seed);
  if (data.source == DataSpec::Source::kCsv && data.path.empty()) {
    throw ConfigError("data.source=csv needs data.path");
  }
  if (data.n < 1 || data.p < 1) throw ConfigError("data.n and data.p must be >= 1");

  const std::string model_kind = r.String("model.kind", "linreg");
  if (model_kind == "linreg") {
    config.model = LinearRegressionMse{};
  } else if (model_kind == "logreg") {
    config.model = LogisticRegression{};
  } else if (model_kind == "mlp") {
    Mlp mlp;
    const std::string* layers = r.Find("model.layers");
    if (!layers) throw ConfigError("model.kind=mlp needs model.layers");
    for (const auto& item : SplitList(*layers)) {
      mlp.layer_sizes.push_back(ToInt<int>("model.layers", item));
    }
    const std::string act = r.String("model.activation", "tanh");
    if (act == "tanh") {
      mlp.activation = Activation::kTanh;
    } else if (act == "relu") {
      mlp.activation = Activation::kRelu;
    } else {
      BadChoice("model.activation", act, "tanh|relu");
    }
    const std::string loss = r.String("model.loss", "squared");
    if (loss == "squared") {
      mlp.loss = MlpLoss::kSquared;
    } else if (loss == "logistic") {
      mlp.loss = MlpLoss::kLogistic;
    } else {
      BadChoice("model.loss", loss, "squared|logistic");
    }
    config.model = mlp;
  } else {
    BadChoice("model.kind", model_kind, "linreg|logreg|mlp");
  }

  OptimizerConfig& opt = config.optimizer;
  opt.eta = r.Double("optimizer.eta", opt.eta);
  opt.T = r.Integer<std::int64_t>("optimizer.T", opt.T);
  opt.m = r.Integer<std::int64_t>("optimizer.m", opt.m);
  opt.clip = r.OptDouble("optimizer.clip");
  opt.gradient_bound = r.OptDouble("optimizer.G");
  const std::string b_update = r.String("optimizer.b_update", "clipped");
  if (b_update == "clipped") {
    opt.b_update = BUpdateSource::kClipped;
  } else if (b_update == "raw") {
    opt.b_update = BUpdateSource::kRaw;
  } else {
    BadChoice("optimizer.b_update", b_update, "clipped|raw");
  }
  opt.full_grad_every = r.Integer<std::int64_t>("optimizer.full_grad_every", 1);
  const std::optional<double> eps = r.OptDouble("privacy.eps");
  const std::optional<double> delta = r.OptDouble("privacy.delta");
  if (eps) {
    opt.budget = PrivacyBudget{*eps, delta.value_or(PrivacyBudget{}.delta)};
    opt.budget->Validate();
  } else if (delta) {
    throw ConfigError("privacy.delta given without privacy.eps");
  }
  opt.sigma = r.OptDouble("privacy.sigma");
  opt.delta_0 = r.OptDouble("privacy.delta0");
  opt.delta_prime = r.OptDouble("privacy.delta_prime");
  if (!opt.sigma && !opt.budget) {
    throw ConfigError("either privacy.sigma or privacy.eps must be given");
  }

  if (const std::string* arms = r.Find("arms")) {
    for (const auto& id : SplitList(*arms)) {
      CheckArmId(id);
      const std::string prefix = "arm." + id + ".";
      config.arms.push_back({id, ReadStep(r, prefix), ReadNoise(r, prefix)});
    }
    std::set<std::string> ids;
    for (const auto& arm : config.arms) {
      if (!ids.insert(arm.id).second) throw ConfigError("duplicate arm id '" + arm.id + "'");
    }
  } else {
    config.arms.push_back({std::string(kSingleArmId), ReadStep(r, ""), ReadNoise(r, "")});
  }
  for (const auto& arm : config.arms) {
    try {
      Validate(arm.step);
      Validate(arm.noise);
    } catch (const DomainError& e) {
      throw ConfigError("arm '" + arm.id + "': " + e.what());
    }
  }

  if (const std::string* seeds = r.Find("seeds")) {
    config.seeds.clear();
    for (const auto& item : SplitList(*seeds)) {
      config.seeds.push_back(ToInt<std::uint64_t>("seeds", item));
    }
  }
  if (config.seeds.empty()) throw ConfigError("at least one seed is required");
  config.output_dir = r.String("output.dir", config.output_dir);
  config.workers = r.Integer<int>("parallel.workers", config.workers);
  if (config.workers < 1) throw ConfigError("parallel.workers must be >= 1");
  config.bounds.L = r.OptDouble("bounds.L");
  config.bounds.G = r.OptDouble("bounds.G");
  config.bounds.D_F = r.OptDouble("bounds.D_F");
  r.RejectUnused();
  return config;
}

KeyValues KeyValuesFromConfig(const ExperimentConfig& config) {
  KeyValues kv;
  const DataSpec& data = config.data;
  if (data.source == DataSpec::Source::kCsv) {
    kv["data.source"] = "csv";
    kv["data.path"] = data.path;
  } else {
    kv["data.source"] = "synthetic";
    if (!data.path.empty()) kv["data.path"] = data.path;
  }
  kv["data.n"] = std::to_string(data.n);
  kv["data.p"] = std::to_string(data.p);
  kv["data.kind"] = data.kind == SyntheticKind::kLinreg ? "linreg" : "logreg";
  kv["data.noise"] = FormatDouble(data.noise);
  kv["data.seed"] = std::to_string(data.seed);

  std::visit(Overloaded{
                 [&](const LinearRegressionMse&) { kv["model.kind"] = "linreg"; },
                 [&](const LogisticRegression&) { kv["model.kind"] = "logreg"; },
                 [&](const Mlp& mlp) {
                   kv["model.kind"] = "mlp";
                   kv["model.layers"] = JoinList(mlp.layer_sizes);
                   kv["model.activation"] =
                       mlp.activation == Activation::kTanh ? "tanh" : "relu";
                   kv["model.loss"] = mlp.loss == MlpLoss::kSquared ? "squared" : "logistic";
                 },
             },
             config.model);

  const OptimizerConfig& opt = config.optimizer;
  kv["optimizer.eta"] = FormatDouble(opt.eta);
  kv["optimizer.T"] = std::to_string(opt.T);
  kv["optimizer.m"] = std::to_string(opt.m);
  if (opt.clip) kv["optimizer.clip"] = FormatDouble(*opt.clip);
  if (opt.gradient_bound) kv["optimizer.G"] = FormatDouble(*opt.gradient_bound);
  kv["optimizer.b_update"] = opt.b_update == BUpdateSource::kClipped ? "clipped" : "raw";
  kv["optimizer.full_grad_every"] = std::to_string(opt.full_grad_every);
  if (opt.budget) {
    kv["privacy.eps"] = FormatDouble(opt.budget->epsilon);
    kv["privacy.delta"] = FormatDouble(opt.budget->delta);
  }
  if (opt.sigma) kv["privacy.sigma"] = FormatDouble(*opt.sigma);
  if (opt.delta_0) kv["privacy.delta0"] = FormatDouble(*opt.delta_0);
  if (opt.delta_prime) kv["privacy.delta_prime"] = FormatDouble(*opt.delta_prime);

  std::vector<std::string> ids;
  for (const auto& arm : config.arms) {
    ids.push_back(arm.id);
    WriteStep(kv, "arm." + arm.id + ".", arm.step);
    WriteNoise(kv, "arm." + arm.id + ".", arm.noise);
  }
  kv["arms"] = JoinList(ids);
  kv["seeds"] = JoinList(config.seeds);
  kv["output.dir"] = config.output_dir;
  kv["parallel.workers"] = std::to_string(config.workers);
  if (config.bounds.L) kv["bounds.L"] = FormatDouble(*config.bounds.L);
  if (config.bounds.G) kv["bounds.G"] = FormatDouble(*config.bounds.G);
  if (config.bounds.D_F) kv["bounds.D_F"] = FormatDouble(*config.bounds.D_F);
  return kv;
}

std::string SerializeConfig(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [key, value] : KeyValuesFromConfig(config)) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

ExperimentConfig ParseConfig(std::string_view text) {
  return ConfigFromKeyValues(ParseKeyValues(text));
}

KeyValues LoadKeyValues(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseKeyValues(buf.str());
}

}  // namespace adpsgd
