#include "tsnet/bounds.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "tsnet/errors.hpp"

namespace tsnet {

namespace {

void check_arch(const Architecture& arch) {
  if (arch.input_dim < 1) throw ConfigError("architecture input dimension must be positive");
  if (arch.widths.empty()) throw ConfigError("architecture needs at least one hidden layer");
  for (int w : arch.widths) {
    if (w < 0) throw ConfigError("architecture widths must be nonnegative");
  }
}

BigInt int_pow(const BigInt& base, int exponent) {
  BigInt result = 1;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

BigInt product_formula(const Architecture& arch) {
  const int n0 = arch.input_dim;
  BigInt product = 1;
  for (std::size_t i = 0; i + 1 < arch.widths.size(); ++i) product *= int_pow(BigInt(arch.widths[i] / n0), n0);
  BigInt tail = 0;
  for (int j = 0; j <= n0; ++j) tail += binomial(arch.widths.back(), j);
  return product * tail;
}

std::string to_decimal(const BigInt& v) { return v.str(); }

std::string to_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

nlohmann::ordered_json arch_json(const Architecture& arch) {
  return {{"input_dim", arch.input_dim}, {"widths", arch.widths}};
}

}  // namespace

BigInt binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt result = 1;
  for (int i = 1; i <= k; ++i) {
    result *= n - k + i;
    result /= i;
  }
  return result;
}

BigInt serra_upper_bound(const Architecture& arch) {
  check_arch(arch);
  const auto L = arch.widths.size();
  // count(l, cap): sum over admissible (j_l..j_L) given the running cap on j_l.
  std::map<std::pair<std::size_t, int>, BigInt> memo;
  auto count = [&](auto&& self, std::size_t l, int cap) -> BigInt {
    if (l == L) return 1;
    const auto key = std::make_pair(l, cap);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const int n = arch.widths[l];
    BigInt total = 0;
    for (int j = 0; j <= std::min(cap, n); ++j) total += binomial(n, j) * self(self, l + 1, std::min(cap, n - j));
    memo.emplace(key, total);
    return total;
  };
  return count(count, 0, arch.input_dim);
}

BigInt montufar_lower_bound(const Architecture& arch) {
  check_arch(arch);
  for (int w : arch.widths) {
    if (w < arch.input_dim) throw ConfigError("montufar lower bound requires every width >= input dimension");
  }
  return product_formula(arch);
}

BigInt active_piece_budget(const Architecture& arch) {
  check_arch(arch);
  return product_formula(arch);
}

double polyhedron_bracketing_bound(int d, int S, double delta) {
  if (d < 1 || S < 1) throw ConfigError("bracketing bound needs d >= 1 and S >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("bracketing bound needs delta in (0, 1)");
  const double dd = d;
  return dd * dd * S * std::log(std::pow(dd, 1.5) * S / delta);
}

EntropyBound g_class_entropy_bound(int N, int L, int d, double delta) {
  if (N < 2 || L < 1 || d < 1) throw ConfigError("entropy bound needs N >= 2, L >= 1, d >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("entropy bound needs delta in (0, 1)");
  const double ld2 = static_cast<double>(L) * d * d;
  const double scale = std::pow(static_cast<double>(N), ld2) * std::pow(static_cast<double>(d), 3);
  return {scale * std::max(ld2 * std::log(static_cast<double>(N)), std::log(1.0 / delta)), scale * ld2};
}

double covering_number_bound(int L, int N, long long S, double B, double delta) {
  if (!(delta > 0.0)) throw ConfigError("covering bound needs delta > 0");
  if (L < 1 || N < 0 || S < 0) throw ConfigError("covering bound needs L >= 1, N >= 0, S >= 0");
  return 2.0 * L * (static_cast<double>(S) + 1.0) *
         std::log((L + 1.0) * (N + 1.0) * std::max(B, 1.0) / delta);
}

nlohmann::ordered_json BoundReport::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["inputs"] = inputs;
  j["value"] = value;
  j["formula"] = formula;
  j["kind"] = kind;
  if (!extra.empty()) j["extra"] = extra;
  return j;
}

BoundReport report_serra(const Architecture& arch) {
  return {"serra", arch_json(arch), to_decimal(serra_upper_bound(arch)),
          "sum_{J} prod_l C(n_l, j_l), j_l <= min(n_0, n_1 - j_1, ..., n_{l-1} - j_{l-1}, n_l)", "exact"};
}

BoundReport report_montufar(const Architecture& arch) {
  return {"montufar", arch_json(arch), to_decimal(montufar_lower_bound(arch)),
          "prod_{i<L} floor(n_i/n_0)^{n_0} * sum_{j<=n_0} C(n_L, j)", "exact"};
}

BoundReport report_active(const Architecture& arch) {
  return {"active", arch_json(arch), to_decimal(active_piece_budget(arch)),
          "prod_{l<L} floor(n_l/d)^d * sum_{j<=d} C(n_L, j)", "exact"};
}

BoundReport report_bracketing(int d, int S, double delta) {
  return {"bracketing", {{"d", d}, {"S", S}, {"delta", delta}}, to_real(polyhedron_bracketing_bound(d, S, delta)),
          "d^2 S log(d^{3/2} S / delta)", "order bound"};
}

BoundReport report_gclass(int N, int L, int d, double delta) {
  const EntropyBound e = g_class_entropy_bound(N, L, d, delta);
  nlohmann::ordered_json inputs = {{"N", N}, {"L", L}, {"d", d}, {"delta", delta}};
  BoundReport r{"gclass", inputs, to_real(e.value),
                "N^{L d^2} d^3 max(L d^2 log N, log(1/delta)); coefficient A = N^{L d^2} d^3 L d^2", "order bound"};
  r.extra["coefficient_A"] = e.coefficient;
  return r;
}

BoundReport report_covering(int L, int N, long long S, double B, double delta) {
  return {"covering",
          {{"L", L}, {"N", N}, {"S", S}, {"B", B}, {"delta", delta}},
          to_real(covering_number_bound(L, N, S, B, delta)),
          "2 L (S + 1) log(delta^{-1} (L + 1) (N + 1) max(B, 1))",
          "order bound"};
}

}  // namespace tsnet
