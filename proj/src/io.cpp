#include "gramridge/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "gramridge/numeric.hpp"

namespace gramridge {

namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) cells.push_back(cell);
  if (!line.empty() && line.back() == delim) cells.push_back("");
  return cells;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  if (begin == end) return false;
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    v(static_cast<Index>(i)) = a[i].get<double>();
  return v;
}

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace

Family family_from_string(const std::string& name) {
  if (name == "linear") return Family::linear;
  if (name == "logistic") return Family::logistic;
  if (name == "cox") return Family::cox;
  throw ConfigError("unknown family: " + name);
}

std::string family_name(Family f) {
  switch (f) {
    case Family::linear: return "linear";
    case Family::logistic: return "logistic";
    case Family::cox: return "cox";
  }
  return "?";
}

TableData read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::string header;
  if (!std::getline(in, header))
    throw ConfigError("empty file: " + path);
  header = strip_cr(header);
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';

  TableData t;
  const auto head_cells = split_line(header, delim);
  if (head_cells.size() < 2)
    throw ConfigError("file needs an id column and at least one value column: " + path);
  t.columns.assign(head_cells.begin() + 1, head_cells.end());

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_line(line, delim);
    if (cells.size() != head_cells.size()) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": expected " << head_cells.size()
          << " cells, found " << cells.size();
      throw ConfigError(msg.str());
    }
    t.ids.push_back(cells[0]);
    std::vector<double> row(cells.size() - 1);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      if (cells[j].empty() || cells[j] == "NA" || cells[j] == "nan") {
        std::ostringstream msg;
        msg << path << ":" << lineno << ": missing value in column '"
            << head_cells[j] << "'";
        throw ConfigError(msg.str());
      }
      if (!parse_double(cells[j], row[j - 1])) {
        std::ostringstream msg;
        msg << path << ":" << lineno << ": non-numeric cell '" << cells[j]
            << "' in column '" << head_cells[j] << "'";
        throw ConfigError(msg.str());
      }
    }
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Index>(rows.size()),
                  static_cast<Index>(t.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return t;
}

void write_table(const std::string& path, const TableData& table, char delim) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << "id";
  for (const auto& c : table.columns) out << delim << c;
  out << '\n';
  char buf[40];
  for (Index i = 0; i < table.values.rows(); ++i) {
    out << table.ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < table.values.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", table.values(i, j));
      out << delim << buf;
    }
    out << '\n';
  }
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }

  RunConfig c;
  try {
    for (const auto& jb : j.at("blocks")) {
      BlockConfig b;
      b.name = jb.at("name").get<std::string>();
      b.path = jb.at("path").get<std::string>();
      if (jb.contains("role")) b.role = jb["role"].get<std::string>();
      c.blocks.push_back(std::move(b));
    }
    const auto& jr = j.at("response");
    c.response_path = jr.at("path").get<std::string>();
    c.family = family_from_string(jr.at("family").get<std::string>());
    if (j.contains("paired")) {
      const auto& jp = j["paired"];
      if (jp.size() != 2)
        throw ConfigError("paired must name exactly two blocks");
      c.paired = {jp[0].get<std::string>(), jp[1].get<std::string>()};
    }
    if (j.contains("preferred"))
      for (const auto& p : j["preferred"]) c.preferred.push_back(p.get<std::string>());
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("criterion"))
      c.criterion = criterion_from_string(j["criterion"].get<std::string>());
    if (j.contains("folds")) {
      const auto& jf = j["folds"];
      if (jf.contains("k")) c.folds_k = jf["k"].get<int>();
      if (jf.contains("repeats")) c.repeats = jf["repeats"].get<int>();
      if (jf.contains("seed")) c.seed = jf["seed"].get<std::uint64_t>();
    }
    if (j.contains("outer_k")) c.outer_k = j["outer_k"].get<int>();
    if (j.contains("workers")) c.workers = j["workers"].get<int>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("tuner")) {
      const auto& jt = j["tuner"];
      if (jt.contains("global_iters")) c.tuner.global_iters = jt["global_iters"].get<int>();
      if (jt.contains("local_iters")) c.tuner.local_iters = jt["local_iters"].get<int>();
      if (jt.contains("log_lower")) c.tuner.log_lower = jt["log_lower"].get<double>();
      if (jt.contains("log_upper")) c.tuner.log_upper = jt["log_upper"].get<double>();
      if (jt.contains("init_lambdas"))
        c.tuner.init_lambdas = vector_from_json(jt["init_lambdas"]);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.tuner.seed = c.seed;
  return c;
}

json RunConfig::to_json() const {
  json j;
  json jblocks = json::array();
  for (const auto& b : blocks)
    jblocks.push_back({{"name", b.name}, {"path", b.path}, {"role", b.role}});
  j["blocks"] = jblocks;
  j["response"] = {{"path", response_path}, {"family", family_name(family)}};
  if (paired) j["paired"] = {paired->first, paired->second};
  if (!preferred.empty()) j["preferred"] = preferred;
  j["method"] = method;
  j["criterion"] = criterion_name(criterion);
  j["folds"] = {{"k", folds_k}, {"repeats", repeats}, {"seed", seed}};
  j["outer_k"] = outer_k;
  j["workers"] = workers;
  json jt = {{"global_iters", tuner.global_iters},
             {"local_iters", tuner.local_iters},
             {"log_lower", tuner.log_lower},
             {"log_upper", tuner.log_upper}};
  if (tuner.init_lambdas) jt["init_lambdas"] = vector_to_json(*tuner.init_lambdas);
  j["tuner"] = jt;
  return j;
}

void RunConfig::validate() const {
  if (blocks.empty()) throw ConfigError("config lists no blocks");
  int penalized = 0;
  for (const auto& b : blocks) {
    if (b.role != "penalized" && b.role != "unpenalized")
      throw ConfigError("unknown block role: " + b.role);
    if (b.role == "penalized") ++penalized;
  }
  if (method != "cv" && method != "ml" && method != "vb")
    throw ConfigError("unknown method: " + method);
  if (method == "vb" && family != Family::logistic)
    throw ConfigError("the vb method requires a binary (logistic) response");
  if (method == "ml" || method == "vb") {
    for (const auto& b : blocks)
      if (b.role == "unpenalized")
        throw ConfigError("the " + method +
                          " method does not support unpenalized blocks");
  }
  if (penalized == 0) throw ConfigError("config needs a penalized block");
  if (criterion == Criterion::auc && family != Family::logistic)
    throw ConfigError("auc requires a logistic response");
  if (criterion == Criterion::cindex && family != Family::cox)
    throw ConfigError("cindex requires a cox response");
  if (criterion == Criterion::mse && family == Family::cox)
    throw ConfigError("mse is undefined for a cox response");
  if (folds_k < 2) throw ConfigError("folds.k must be at least 2");
  if (repeats < 1) throw ConfigError("folds.repeats must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

std::string RunConfig::fingerprint() const {
  std::ostringstream hex;
  hex << std::hex << fnv1a(to_json().dump());
  return hex.str();
}

IngestResult ingest(const RunConfig& config) {
  config.validate();
  const TableData resp_table = read_table(config.response_path);
  const std::vector<std::string>& ids = resp_table.ids;
  const Index n = static_cast<Index>(ids.size());
  if (n == 0) throw ConfigError("response file has no samples");

  ResponseSpec response = ResponseSpec::linear(Vector());
  if (config.family == Family::cox) {
    if (resp_table.values.cols() < 2)
      throw ConfigError("cox response needs (id, time, status) columns");
    response = ResponseSpec::cox(resp_table.values.col(0), resp_table.values.col(1));
  } else if (config.family == Family::logistic) {
    response = ResponseSpec::logistic(resp_table.values.col(0));
  } else {
    response = ResponseSpec::linear(resp_table.values.col(0));
  }

  std::unordered_map<std::string, Index> id_row;
  for (Index i = 0; i < n; ++i) {
    if (!id_row.emplace(ids[static_cast<std::size_t>(i)], i).second)
      throw ConfigError("duplicate sample id in response: " +
                        ids[static_cast<std::size_t>(i)]);
  }

  std::vector<Matrix> penalized;
  std::vector<std::string> names;
  std::optional<Matrix> unpen;
  for (const auto& b : config.blocks) {
    const TableData t = read_table(b.path);
    if (t.ids.size() != static_cast<std::size_t>(n)) {
      std::ostringstream msg;
      msg << "block '" << b.name << "' has " << t.ids.size()
          << " samples, response has " << n;
      throw ConfigError(msg.str());
    }
    // Align by id to the response order.
    Matrix aligned(n, t.values.cols());
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<std::string> unknown;
    for (std::size_t i = 0; i < t.ids.size(); ++i) {
      const auto it = id_row.find(t.ids[i]);
      if (it == id_row.end()) {
        if (unknown.size() < 10) unknown.push_back(t.ids[i]);
        continue;
      }
      seen[static_cast<std::size_t>(it->second)] = true;
      aligned.row(it->second) = t.values.row(static_cast<Index>(i));
    }
    if (!unknown.empty()) {
      std::ostringstream msg;
      msg << "block '" << b.name << "' contains ids absent from the response:";
      for (const auto& u : unknown) msg << ' ' << u;
      throw ConfigError(msg.str());
    }
    std::vector<std::string> missing;
    for (Index i = 0; i < n; ++i)
      if (!seen[static_cast<std::size_t>(i)] && missing.size() < 10)
        missing.push_back(ids[static_cast<std::size_t>(i)]);
    if (!missing.empty()) {
      std::ostringstream msg;
      msg << "block '" << b.name << "' is missing sample ids:";
      for (const auto& m : missing) msg << ' ' << m;
      throw ConfigError(msg.str());
    }
    if (b.role == "penalized") {
      penalized.push_back(std::move(aligned));
      names.push_back(b.name);
    } else if (!unpen) {
      unpen = std::move(aligned);
    } else {
      Matrix merged(n, unpen->cols() + aligned.cols());
      merged << *unpen, aligned;
      unpen = std::move(merged);
    }
  }

  std::optional<PairedSpec> paired;
  if (config.paired) {
    Index a = -1, bidx = -1;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == config.paired->first) a = static_cast<Index>(i);
      if (names[i] == config.paired->second) bidx = static_cast<Index>(i);
    }
    if (a < 0 || bidx < 0)
      throw ConfigError("paired block names not found among penalized blocks");
    paired = PairedSpec{a, bidx};
  }

  return IngestResult{
      BlockedDesign(std::move(penalized), std::move(names), std::move(unpen),
                    paired),
      std::move(response), ids};
}

void FitArtifact::save(const std::string& path) const {
  json j;
  j["format_version"] = format_version;
  j["config_fingerprint"] = config_fingerprint;
  j["created"] = created.empty() ? now_iso8601() : created;
  j["method"] = method;
  j["family"] = family_name(family);
  j["block_names"] = block_names;
  j["lambdas"] = vector_to_json(lambdas);
  j["lambda3"] = lambda3;
  j["beta_unpen"] = vector_to_json(beta_unpen);
  json jb = json::array();
  for (const auto& b : beta_blocks) jb.push_back(vector_to_json(b));
  j["beta_blocks"] = jb;
  j["eta"] = vector_to_json(eta);
  if (baseline) {
    j["baseline"] = {{"times", baseline->times},
                     {"increments", baseline->increments}};
  }
  json jt = json::array();
  for (const auto& r : trace)
    jt.push_back({{"lambdas", vector_to_json(r.lambdas)},
                  {"lambda3", r.lambda3},
                  {"utility", r.utility}});
  j["trace"] = jt;

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write artifact: " + path);
  out << j.dump(2) << '\n';
}

FitArtifact FitArtifact::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open artifact: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("artifact parse error: " + std::string(e.what()));
  }
  FitArtifact a;
  try {
    a.format_version = j.at("format_version").get<int>();
    if (a.format_version != 1)
      throw ConfigError("unsupported artifact format version");
    a.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    a.created = j.value("created", "");
    a.method = j.value("method", "cv");
    a.family = family_from_string(j.at("family").get<std::string>());
    a.block_names = j.at("block_names").get<std::vector<std::string>>();
    a.lambdas = vector_from_json(j.at("lambdas"));
    a.lambda3 = j.value("lambda3", 0.0);
    a.beta_unpen = vector_from_json(j.at("beta_unpen"));
    for (const auto& jb : j.at("beta_blocks"))
      a.beta_blocks.push_back(vector_from_json(jb));
    a.eta = vector_from_json(j.at("eta"));
    if (j.contains("baseline")) {
      BaselineHazard b;
      b.times = j["baseline"]["times"].get<std::vector<double>>();
      b.increments = j["baseline"]["increments"].get<std::vector<double>>();
      double cum = 0.0;
      for (double inc : b.increments) {
        cum += inc;
        b.cumulative.push_back(cum);
      }
      a.baseline = std::move(b);
    }
    if (j.contains("trace")) {
      for (const auto& jr : j["trace"]) {
        EvalRecord r;
        r.lambdas = vector_from_json(jr.at("lambdas"));
        r.lambda3 = jr.value("lambda3", 0.0);
        r.utility = jr.at("utility").get<double>();
        a.trace.push_back(std::move(r));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("invalid artifact: " + std::string(e.what()));
  }
  return a;
}

Vector FitArtifact::predict(const std::vector<Matrix>& blocks,
                            const Matrix* unpen) const {
  if (blocks.size() != beta_blocks.size())
    throw ConfigError("prediction block count does not match artifact");
  Index m = blocks.empty() ? (unpen ? unpen->rows() : 0) : blocks.front().rows();
  Vector eta_new = Vector::Zero(m);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].cols() != beta_blocks[b].size()) {
      std::ostringstream msg;
      msg << "block '" << block_names[b] << "' has " << blocks[b].cols()
          << " columns, artifact expects " << beta_blocks[b].size();
      throw ConfigError(msg.str());
    }
    if (blocks[b].rows() != m)
      throw ConfigError("prediction blocks disagree on row count");
    eta_new += blocks[b] * beta_blocks[b];
  }
  if (beta_unpen.size() > 0) {
    if (unpen == nullptr || unpen->cols() != beta_unpen.size())
      throw ConfigError("artifact expects an unpenalized block for prediction");
    eta_new += *unpen * beta_unpen;
  }
  return eta_new;
}

double FitArtifact::response_scale(double eta_value) const {
  if (family == Family::logistic)
    return method == "vb" ? norm_cdf(eta_value) : expit(eta_value);
  if (family == Family::cox) return std::exp(eta_value);
  return eta_value;
}

}  // namespace gramridge
