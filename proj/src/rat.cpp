#include "stoptime/rat.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "stoptime/errors.hpp"

namespace stoptime {

namespace {

bool is_plain_integer(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

}  // namespace

Rat rat_from_string(const std::string& s) {
  if (s.empty()) throw ParseError("empty rational literal");

  auto slash = s.find('/');
  if (slash != std::string::npos) {
    std::string num = s.substr(0, slash);
    std::string den = s.substr(slash + 1);
    if (!is_plain_integer(num) || !is_plain_integer(den))
      throw ParseError("bad rational literal '" + s + "'");
    Int n(num), d(den);
    if (d == 0) throw ParseError("zero denominator in '" + s + "'");
    Rat q(n, d);
    q.canonicalize();
    return q;
  }

  auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string intpart = s.substr(0, dot);
    std::string frac = s.substr(dot + 1);
    bool neg = !intpart.empty() && intpart[0] == '-';
    if (intpart.empty() || intpart == "-" || intpart == "+") intpart += "0";
    if (!is_plain_integer(intpart) || frac.empty() ||
        !is_plain_integer(frac) || frac[0] == '-' || frac[0] == '+')
      throw ParseError("bad decimal literal '" + s + "'");
    Int scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    Int whole(intpart);
    Int fracval(frac);
    Int num = whole * scale + (neg ? -fracval : fracval);
    Rat q(num, scale);
    q.canonicalize();
    return q;
  }

  if (!is_plain_integer(s)) throw ParseError("bad rational literal '" + s + "'");
  return Rat(Int(s));
}

std::string rat_to_string(const Rat& q) { return q.get_str(); }

std::string rat_to_decimal(const Rat& q) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", to_double(q));
  return buf;
}

double to_double(const Rat& q) { return q.get_d(); }

Rat rat_from_double_exact(double x) {
  if (!std::isfinite(x)) throw RangeError("non-finite double");
  Rat q;
  mpq_set_d(q.get_mpq_t(), x);
  return q;
}

std::int64_t to_index(const Rat& q) {
  if (!is_integer(q) || q < 0)
    throw IndexError("expected a nonnegative integer, got " + rat_to_string(q));
  if (!q.get_num().fits_slong_p())
    throw IndexError("index out of range: " + rat_to_string(q));
  return q.get_num().get_si();
}

Int floor_rat(const Rat& q) {
  Int r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num().get_mpz_t(), q.get_den().get_mpz_t());
  return r;
}

Int ceil_rat(const Rat& q) {
  Int r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num().get_mpz_t(), q.get_den().get_mpz_t());
  return r;
}

double rat_ln(const Rat& q) {
  if (q <= 0) throw PreconditionError("rat_ln needs a positive argument");
  signed long num_exp = 0, den_exp = 0;
  double num_m = mpz_get_d_2exp(&num_exp, q.get_num().get_mpz_t());
  double den_m = mpz_get_d_2exp(&den_exp, q.get_den().get_mpz_t());
  constexpr double ln2 = 0.6931471805599453;
  return std::log(num_m) - std::log(den_m) +
         (double(num_exp) - double(den_exp)) * ln2;
}

}  // namespace stoptime
