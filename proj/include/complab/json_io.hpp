#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "complab/relu_net.hpp"
#include "complab/spline.hpp"
#include "complab/staircase.hpp"
#include "complab/valid_set.hpp"

namespace complab {

using json = nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  json j;
  in >> j;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << text;
}

// A point is a number (k=1) or an array of numbers.
inline Vec parse_point(const json& j) {
  if (j.is_number()) return {j.get<double>()};
  return j.get<Vec>();
}

/// ValidSet <-> JSON array of arrays of numbers (bare numbers allowed for
/// k=1 on input).
inline ValidSet valid_set_from_json(const json& j) {
  std::vector<Vec> pts;
  for (const json& p : j) pts.push_back(parse_point(p));
  return ValidSet(std::move(pts));
}

inline json valid_set_to_json(const ValidSet& v) {
  json j = json::array();
  for (const Vec& p : v.points()) j.push_back(p);
  return j;
}

/// StaircaseSpec JSON: {"id": ..., "intervals": [[lo,hi],...],
/// "values": [... points ...]}.
inline StaircaseSpec staircase_from_json(const json& j) {
  std::vector<Interval> ivs;
  for (const json& iv : j.at("intervals"))
    ivs.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  std::vector<Vec> vals;
  for (const json& v : j.at("values")) vals.push_back(parse_point(v));
  return StaircaseSpec(std::move(ivs), std::move(vals),
                       j.value("id", std::string{}));
}

inline json staircase_to_json(const StaircaseSpec& s) {
  json j;
  j["id"] = s.id();
  j["intervals"] = json::array();
  for (const Interval& iv : s.intervals())
    j["intervals"].push_back({iv.lo, iv.hi});
  j["values"] = json::array();
  for (const Vec& v : s.values()) j["values"].push_back(v);
  return j;
}

inline json spline_to_json(const LinearSpline& f) {
  json j;
  j["knots"] = json::array();
  for (const auto& k : f.knots()) j["knots"].push_back({k.x, k.y});
  j["left_slope"] = f.left_slope();
  j["right_slope"] = f.right_slope();
  return j;
}

inline LinearSpline spline_from_json(const json& j) {
  std::vector<LinearSpline::Knot> ks;
  for (const json& k : j.at("knots"))
    ks.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
  return LinearSpline(std::move(ks), j.at("left_slope").get<double>(),
                      j.at("right_slope").get<double>());
}

/// Shape-tagged network parameters.
inline json net_to_json(const ReluNet2& n) {
  json j;
  j["in_dim"] = n.in_dim;
  j["out_dim"] = n.out_dim;
  j["hidden"] = n.hidden;
  j["w1"] = n.w1;
  j["b1"] = n.b1;
  j["w2"] = n.w2;
  j["b2"] = n.b2;
  return j;
}

inline ReluNet2 net_from_json(const json& j) {
  ReluNet2 n;
  n.in_dim = j.at("in_dim").get<std::size_t>();
  n.out_dim = j.at("out_dim").get<std::size_t>();
  n.hidden = j.at("hidden").get<std::size_t>();
  n.w1 = j.at("w1").get<std::vector<double>>();
  n.b1 = j.at("b1").get<std::vector<double>>();
  n.w2 = j.at("w2").get<std::vector<double>>();
  n.b2 = j.at("b2").get<std::vector<double>>();
  if (n.w1.size() != n.hidden * n.in_dim || n.b1.size() != n.hidden ||
      n.w2.size() != n.out_dim * n.hidden || n.b2.size() != n.out_dim)
    throw std::invalid_argument("net_from_json: shape mismatch");
  return n;
}

}  // namespace complab
