#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <vector>

#include <json.hpp>

namespace tsnet {

using BigInt = boost::multiprecision::cpp_int;

/// Input dimension n_0 and hidden widths n_1..n_L.
struct Architecture {
  int input_dim = 1;
  std::vector<int> widths;
};

/// Exact binomial coefficient C(n, k); zero when k > n or k < 0.
BigInt binomial(int n, int k);

/// Maximal number of activation regions: sum over J of prod_l C(n_l, j_l), with
/// j_l <= min(n_0, n_1 - j_1, ..., n_{l-1} - j_{l-1}, n_l). Tight for one hidden layer.
BigInt serra_upper_bound(const Architecture& arch);

/// (prod_{i<L} floor(n_i / n_0)^{n_0}) * sum_{j<=n_0} C(n_L, j). Requires n_i >= n_0.
BigInt montufar_lower_bound(const Architecture& arch);

/// Same product formula with d = n_0 and no width hypothesis; the capacity for
/// active pieces that a student of this architecture can match.
BigInt active_piece_budget(const Architecture& arch);

/// d^2 S log(d^{3/2} S / delta), reported with constant 1.
double polyhedron_bracketing_bound(int d, int S, double delta);

struct EntropyBound {
  double value = 0.0;        ///< N^{L d^2} d^3 max(L d^2 log N, log(1/delta))
  double coefficient = 0.0;  ///< N^{L d^2} d^3 L d^2
};
EntropyBound g_class_entropy_bound(int N, int L, int d, double delta);

/// 2 L (S + 1) log(delta^{-1} (L + 1) (N + 1) max(B, 1)).
double covering_number_bound(int L, int N, long long S, double B, double delta);

/// One-line summary of a bound evaluation.
struct BoundReport {
  std::string name;
  nlohmann::ordered_json inputs;
  std::string value;  ///< decimal big integer or real
  std::string formula;
  std::string kind;   ///< "exact" or "order bound"
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();  ///< derived outputs

  nlohmann::ordered_json to_json() const;
};

BoundReport report_serra(const Architecture& arch);
BoundReport report_montufar(const Architecture& arch);
BoundReport report_active(const Architecture& arch);
BoundReport report_bracketing(int d, int S, double delta);
BoundReport report_gclass(int N, int L, int d, double delta);
BoundReport report_covering(int L, int N, long long S, double B, double delta);

}  // namespace tsnet
