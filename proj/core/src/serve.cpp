#include "geocon/serve.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <vector>

#include "geocon/viz_stats.hpp"

namespace geocon {

using nlohmann::json;

namespace {

struct HttpError {
  int status;
  std::string reason;
  std::string message;
};

[[noreturn]] void not_found(std::string reason, std::string message) {
  throw HttpError{404, std::move(reason), std::move(message)};
}
[[noreturn]] void bad_request(std::string reason, std::string message) {
  throw HttpError{400, std::move(reason), std::move(message)};
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    const std::size_t slash = path.find('/', pos);
    const std::size_t end = slash == std::string_view::npos ? path.size() : slash;
    if (end > pos) parts.emplace_back(path.substr(pos, end - pos));
    if (slash == std::string_view::npos) break;
    pos = slash + 1;
  }
  return parts;
}

const std::string* param(const QueryParams& q, const std::string& key) {
  const auto it = q.find(key);
  return it == q.end() ? nullptr : &it->second;
}

double number_param(const QueryParams& q, const std::string& key) {
  const std::string& text = *param(q, key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || std::isnan(v)) {
    bad_request("bad_parameter", key + " must be a number, got '" + text + "'");
  }
  return v;
}

std::size_t count_param(const QueryParams& q, const std::string& key, std::size_t fallback) {
  const std::string* text = param(q, key);
  if (!text) return fallback;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
  if (ec != std::errc() || ptr != text->data() + text->size()) {
    bad_request("bad_parameter", key + " must be a non-negative integer, got '" + *text + "'");
  }
  return v;
}

GraphKind kind_param(const QueryParams& q) {
  const std::string* text = param(q, "kind");
  if (!text) return GraphKind::Socioeconomic;
  try {
    return parse_graph_kind(*text);
  } catch (const Error&) {
    bad_request("bad_parameter", "kind must be 'border' or 'socio', got '" + *text + "'");
  }
}

const StateResults& state_or_404(const ResultStore& store, const std::string& s) {
  const StateResults* r = store.find(s);
  if (!r) not_found("unknown_state", "no results for state '" + s + "'");
  return *r;
}

CountyValues variable_values(const StateResults& r, const std::string& var) {
  CountyValues out;
  const auto& order = r.stored.panel.county_order;
  if (var == "population") {
    for (const auto& c : r.counties) {
      if (c.population) out[c.fips] = static_cast<double>(*c.population);
    }
    return out;
  }
  const auto it = r.means.find(var);
  if (it == r.means.end()) not_found("unknown_variable", "no variable '" + var + "'");
  for (std::size_t n = 0; n < order.size(); ++n) out[order[n]] = it->second[n];
  return out;
}

json list_states(const ResultStore& store) {
  json states = json::array();
  for (const auto& [code, r] : store.states()) {
    json results = json::array();
    for (const auto& [key, table] : r.votes) {
      results.push_back({{"factor", key.factor}, {"kind", to_string(key.kind)}, {"alpha", key.alpha}});
    }
    json graphs = json::array();
    for (const auto& [kind, g] : r.graphs) graphs.push_back(to_string(kind));
    const FeaturePanel& p = r.stored.panel;
    states.push_back({{"state", code},
                      {"counties", p.counties()},
                      {"variables", p.variable_order},
                      {"start", format_date(p.range.first)},
                      {"end", format_date(p.range.last)},
                      {"graphs", std::move(graphs)},
                      {"results", std::move(results)}});
  }
  return {{"states", std::move(states)}};
}

json counties(const std::string& code, const StateResults& r) {
  json list = json::array();
  for (std::size_t n = 0; n < r.counties.size(); ++n) {
    json summary = json::object();
    for (const auto& [var, means] : r.means) summary[var] = means[n];
    const CountyInfo& c = r.counties[n];
    list.push_back({{"fips", c.fips},
                    {"name", c.name},
                    {"population", c.population ? json(*c.population) : json(nullptr)},
                    {"summary", std::move(summary)}});
  }
  return {{"state", code}, {"counties", std::move(list)}};
}

json network(const std::string& code, const StateResults& r, const QueryParams& q) {
  const GraphKind kind = kind_param(q);
  CountyGraph graph;
  json threshold = nullptr;
  if (param(q, "threshold")) {
    if (kind != GraphKind::Socioeconomic) {
      bad_request("bad_parameter", "threshold applies to the socio graph only");
    }
    const double d = number_param(q, "threshold");
    if (d < 0.0) bad_request("bad_parameter", "threshold must be >= 0");
    if (!r.distances) not_found("missing_graph", "no socio distance matrix for state " + code);
    graph = build_socio_graph(*r.distances, Threshold{d});
    if (std::isfinite(d)) threshold = d;
  } else {
    const auto it = r.graphs.find(kind);
    if (it == r.graphs.end()) {
      not_found("missing_graph", "no " + to_string(kind) + " graph for state " + code);
    }
    graph = it->second;
  }
  return {{"state", code},
          {"kind", to_string(kind)},
          {"threshold", threshold},
          {"graph", to_json(graph)},
          {"centrality", to_json(ranked(degree_centrality(graph)))}};
}

json variable(const std::string& code, const StateResults& r, const std::string& var,
              const QueryParams& q) {
  const std::size_t k = count_param(q, "bins", 5);
  if (k < 2) bad_request("bad_parameter", "bins must be >= 2");
  const CountyValues values = variable_values(r, var);
  if (values.empty()) not_found("unknown_variable", "no values for '" + var + "'");
  const QuantileBinning binning = quantile_bins(values, k);
  return {{"state", code},
          {"variable", var},
          {"values", values},
          {"binning", to_json(binning)},
          {"histogram", histogram(binning)}};
}

json votes(const std::string& code, const StateResults& r, const QueryParams& q) {
  const std::string* factor = param(q, "factor");
  if (!factor) bad_request("missing_parameter", "factor is required");
  const GraphKind kind = kind_param(q);
  const double alpha = param(q, "alpha") ? number_param(q, "alpha") : 0.1;
  for (const auto& [key, table] : r.votes) {
    if (key.factor == *factor && key.kind == kind && std::abs(key.alpha - alpha) < 1e-12) {
      const VoteAggregate agg = aggregate_votes(table);
      json j = to_json(table);
      j["aggregate"] = to_json(agg);
      j["histogram"] = agg.histogram;
      return j;
    }
  }
  not_found("unknown_result", "no vote table for factor '" + *factor + "', kind " +
                                  to_string(kind) + ", alpha " + format_alpha(alpha) +
                                  " in state " + code);
}

json scatter(const std::string& code, const StateResults& r, const QueryParams& q) {
  const std::string* x = param(q, "x");
  const std::string* y = param(q, "y");
  if (!x || !y) bad_request("missing_parameter", "x and y are required");
  const CountyValues xs = variable_values(r, *x);
  const CountyValues ys = variable_values(r, *y);
  json points = json::array();
  for (const auto& [fips, xv] : xs) {
    const auto it = ys.find(fips);
    if (it != ys.end()) points.push_back({{"fips", fips}, {"x", xv}, {"y", it->second}});
  }
  json trend = nullptr;
  if (points.size() >= 2) trend = to_json(trend_line(xs, ys));
  return {{"state", code}, {"x", *x}, {"y", *y}, {"points", std::move(points)}, {"trend", trend}};
}

json route(const ResultStore& store, std::string_view path, const QueryParams& q) {
  const auto parts = split_path(path);
  if (parts.size() < 2 || parts[0] != "api" || parts[1] != "states") {
    not_found("unknown_endpoint", "no endpoint " + std::string(path));
  }
  if (parts.size() == 2) return list_states(store);
  const std::string& code = parts[2];
  const StateResults& r = state_or_404(store, code);
  if (parts.size() == 4 && parts[3] == "counties") return counties(code, r);
  if (parts.size() == 4 && parts[3] == "network") return network(code, r, q);
  if (parts.size() == 5 && parts[3] == "variables") return variable(code, r, parts[4], q);
  if (parts.size() == 4 && parts[3] == "votes") return votes(code, r, q);
  if (parts.size() == 4 && parts[3] == "scatter") return scatter(code, r, q);
  not_found("unknown_endpoint", "no endpoint " + std::string(path));
}

}  // namespace

ApiResponse handle_request(const ResultStore& store, std::string_view path, const QueryParams& query) {
  try {
    return {200, route(store, path, query).dump()};
  } catch (const HttpError& e) {
    const json body = {{"error", {{"status", e.status}, {"reason", e.reason}, {"message", e.message}}}};
    return {e.status, body.dump()};
  } catch (const std::exception& e) {
    const json body = {{"error", {{"status", 500}, {"reason", "internal"}, {"message", e.what()}}}};
    return {500, body.dump()};
  }
}

struct ApiServer::Impl {
  const ResultStore& store;
  httplib::Server server;
};

ApiServer::ApiServer(const ResultStore& store) : impl_(new Impl{store, {}}) {
  auto& svr = impl_->server;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  const ResultStore* st = &impl_->store;
  svr.Get(".*", [st](const httplib::Request& req, httplib::Response& res) {
    QueryParams q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    const ApiResponse r = handle_request(*st, req.path, q);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace geocon
