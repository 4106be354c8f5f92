#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>

namespace stoptime {

// Exact rational arithmetic. mpq_class keeps values canonical (positive
// denominator, reduced); every helper below preserves that and never
// rounds. Floating point enters only through explicit conversions.
using Rat = mpq_class;
using Int = mpz_class;

// Accepts "num/den", plain integers, and finite decimal strings such as
// "0.25" or "-3.5". Rejects everything else with ParseError; a zero
// denominator is a ParseError as well.
Rat rat_from_string(const std::string& s);

// Canonical rendering: "num/den", or just "num" when the denominator is 1.
std::string rat_to_string(const Rat& q);

// Decimal rendering with enough digits to identify the value as a double.
std::string rat_to_decimal(const Rat& q);

double to_double(const Rat& q);

// The exact dyadic rational equal to the given finite double.
Rat rat_from_double_exact(double x);

// Conversion that refuses to truncate; IndexError when q is not a
// nonnegative integer that fits int64.
std::int64_t to_index(const Rat& q);

inline Rat rat_abs(const Rat& q) { return q < 0 ? Rat(-q) : q; }

Int floor_rat(const Rat& q);
Int ceil_rat(const Rat& q);

// Natural log of a positive rational, stable for magnitudes far outside
// double range (computed from mantissa-and-exponent splits, never by a
// lossy to_double first). PreconditionError on q <= 0.
double rat_ln(const Rat& q);

inline bool is_integer(const Rat& q) { return q.get_den() == 1; }

}  // namespace stoptime
