#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "stoptime/model.hpp"
#include "stoptime/reductions.hpp"

namespace stoptime {

enum class Answer { Yes, No, Unknown };

std::string answer_name(Answer a);

// Outcome of the threshold decision "val(chain, T) < theta".
//
// witness meaning depends on the answer. Yes: the first time t whose exact
// utility sits strictly below the bottom line (or below theta itself when t
// is the point mass at T). No: every integer t <= witness was checked
// exactly and everything beyond is certified analytically. Unknown: the
// exhausted search horizon.
struct Verdict {
  Answer answer = Answer::Unknown;
  std::optional<Int> witness;
  std::optional<PositivityInstance> residual;
};

// Steepest line through (T, theta) that stays weakly below the utility
// points left of T. touch_t1 is the smallest integer where the maximum
// slope is attained, which doubles as the t1 of a witnessing bi-Dirac.
struct BottomLine {
  Rat b;
  std::int64_t touch_t1 = 0;
};

BottomLine bottom_line(const MarkovChain& chain, const Rat& T,
                       const Rat& theta);

Verdict exact_decide(const ExactInstance& inst,
                     std::int64_t unknown_horizon = 10000);

}  // namespace stoptime
