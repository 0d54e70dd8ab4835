#pragma once

// The five-primitive layout editing language:
//
//   SELECT obj_N
//   MOVE [dx, dy, dz]
//   ROTATE_Y [d]        (one unit = one yaw bin)
//   RESIZE [d]          (scale by 1 + d * 0.1)
//   STOP
//
// One action per line, integer parameters only.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lap/error.hpp"
#include "lap/scene.hpp"

namespace lap {

struct Select {
  int target = 0;
  bool operator==(const Select&) const = default;
};
struct Move {
  int dx = 0, dy = 0, dz = 0;
  bool operator==(const Move&) const = default;
};
struct RotateY {
  int d = 0;
  bool operator==(const RotateY&) const = default;
};
struct Resize {
  int ds = 0;
  bool operator==(const Resize&) const = default;
};
struct Stop {
  bool operator==(const Stop&) const = default;
};

using Action = std::variant<Select, Move, RotateY, Resize, Stop>;
using ActionSequence = std::vector<Action>;

inline bool is_transform(const Action& a) {
  return std::holds_alternative<Move>(a) || std::holds_alternative<RotateY>(a) ||
         std::holds_alternative<Resize>(a);
}

inline bool is_stop_only(const ActionSequence& seq) {
  return seq.size() == 1 && std::holds_alternative<Stop>(seq.front());
}

// ---------------------------------------------------------------------------
// Text form

inline std::string to_string(const Action& a) {
  struct V {
    std::string operator()(const Select& s) const { return "SELECT obj_" + std::to_string(s.target); }
    std::string operator()(const Move& m) const {
      return "MOVE [" + std::to_string(m.dx) + ", " + std::to_string(m.dy) + ", " + std::to_string(m.dz) + "]";
    }
    std::string operator()(const RotateY& r) const { return "ROTATE_Y [" + std::to_string(r.d) + "]"; }
    std::string operator()(const Resize& r) const { return "RESIZE [" + std::to_string(r.ds) + "]"; }
    std::string operator()(const Stop&) const { return "STOP"; }
  };
  return std::visit(V{}, a);
}

inline std::string serialize(const ActionSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += '\n';
    out += to_string(seq[i]);
  }
  return out;
}

enum class ParseMode { Strict, Lenient };

struct Diagnostic {
  int line = 0; // 1-based
  std::string text;
  std::string reason;
};

struct ParseResult {
  ActionSequence actions;
  std::vector<Diagnostic> diagnostics;
};

namespace detail {

class LineCursor {
public:
  explicit LineCursor(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size();
  }
  std::string_view keyword() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && ((s_[pos_] >= 'A' && s_[pos_] <= 'Z') || s_[pos_] == '_')) ++pos_;
    return s_.substr(start, pos_ - start);
  }
  bool literal(std::string_view lit) {
    skip_ws();
    if (s_.substr(pos_, lit.size()) != lit) return false;
    pos_ += lit.size();
    return true;
  }
  /// Signed integer; sets `reason` on failure.
  bool integer(int& out, std::string& reason) {
    skip_ws();
    std::size_t p = pos_;
    if (p < s_.size() && s_[p] == '+') ++p;
    const char* first = s_.data() + p;
    const char* last = s_.data() + s_.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec == std::errc::result_out_of_range) {
      reason = "integer out of range";
      return false;
    }
    if (ec != std::errc() || ptr == first) {
      reason = "expected integer";
      return false;
    }
    if (ptr != last && (*ptr == '.' || *ptr == 'e' || *ptr == 'E')) {
      reason = "non-integer parameter";
      return false;
    }
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return true;
  }

private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

inline bool parse_bracketed(LineCursor& c, int* values, int count, std::string& reason) {
  if (!c.literal("[")) {
    reason = "expected '['";
    return false;
  }
  for (int i = 0; i < count; ++i) {
    if (i && !c.literal(",")) {
      reason = "expected ','";
      return false;
    }
    if (!c.integer(values[i], reason)) return false;
  }
  if (!c.literal("]")) {
    reason = "expected ']'";
    return false;
  }
  return true;
}

inline std::optional<Action> parse_line(std::string_view line, std::string& reason) {
  LineCursor c(line);
  const std::string_view kw = c.keyword();
  Action out;
  if (kw == "SELECT") {
    if (!c.literal("obj_")) {
      reason = "expected obj_N";
      return std::nullopt;
    }
    int n = 0;
    if (!c.integer(n, reason)) return std::nullopt;
    if (n < 0) {
      reason = "negative object index";
      return std::nullopt;
    }
    out = Select{n};
  } else if (kw == "MOVE") {
    int v[3];
    if (!parse_bracketed(c, v, 3, reason)) return std::nullopt;
    out = Move{v[0], v[1], v[2]};
  } else if (kw == "ROTATE_Y") {
    int v[1];
    if (!parse_bracketed(c, v, 1, reason)) return std::nullopt;
    out = RotateY{v[0]};
  } else if (kw == "RESIZE") {
    int v[1];
    if (!parse_bracketed(c, v, 1, reason)) return std::nullopt;
    out = Resize{v[0]};
  } else if (kw == "STOP") {
    out = Stop{};
  } else {
    reason = kw.empty() ? "unrecognized line" : "unknown action '" + std::string(kw) + "'";
    return std::nullopt;
  }
  if (!c.at_end()) {
    reason = "trailing characters";
    return std::nullopt;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char ch) { return ch == ' ' || ch == '\t' || ch == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

} // namespace detail

/// Strict mode throws ParseError on the first malformed line; lenient mode skips
/// and reports. Anything after STOP is rejected (strict) or dropped (lenient).
inline ParseResult parse(std::string_view text, ParseMode mode = ParseMode::Strict) {
  ParseResult out;
  bool stopped = false;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string_view line = detail::trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;

    std::string reason;
    std::optional<Action> action = detail::parse_line(line, reason);
    if (action && stopped) {
      action.reset();
      reason = "action after STOP";
    }
    if (!action) {
      if (mode == ParseMode::Strict) throw ParseError(line_no, reason);
      out.diagnostics.push_back({line_no, std::string(line), reason});
      continue;
    }
    if (std::holds_alternative<Stop>(*action)) stopped = true;
    out.actions.push_back(*action);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind { TransformBeforeSelect, UnknownObject, BelowGround, SizeBelowMinimum, StopNotLast };

struct Violation {
  std::size_t index = 0; // position in the sequence
  ViolationKind kind{};
  std::string message;
};

/// Integer form of s * (1 + ds / 10) rounded half away from zero, without the size floor.
inline int scaled_size(int s, int ds) {
  const long long n = 1LL * s * (10 + ds);
  if (n <= 0) return 0;
  return static_cast<int>((n + 5) / 10);
}

inline std::vector<Violation> validate(const ActionSequence& seq, const GridLayout& layout) {
  std::vector<Violation> out;
  std::vector<GridBox> objs = layout.objects;
  std::optional<std::size_t> target;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Action& a = seq[i];
    if (std::holds_alternative<Stop>(a)) {
      if (i + 1 != seq.size()) out.push_back({i, ViolationKind::StopNotLast, "STOP not last"});
      continue;
    }
    if (const auto* s = std::get_if<Select>(&a)) {
      if (s->target < 0 || static_cast<std::size_t>(s->target) >= objs.size()) {
        out.push_back({i, ViolationKind::UnknownObject, "unknown object obj_" + std::to_string(s->target)});
        target.reset();
      } else {
        target = static_cast<std::size_t>(s->target);
      }
      continue;
    }
    if (!target) {
      out.push_back({i, ViolationKind::TransformBeforeSelect, "transform before SELECT"});
      continue;
    }
    GridBox& g = objs[*target];
    if (const auto* m = std::get_if<Move>(&a)) {
      g.pos[0] += m->dx;
      g.pos[1] += m->dy;
      g.pos[2] += m->dz;
      if (g.pos[1] < 0) {
        out.push_back({i, ViolationKind::BelowGround, "below ground"});
        g.pos[1] = 0;
      }
    } else if (const auto* r = std::get_if<Resize>(&a)) {
      bool small = false;
      for (int& s : g.size) {
        s = scaled_size(s, r->ds);
        if (s < 1) {
          small = true;
          s = 1;
        }
      }
      if (small) out.push_back({i, ViolationKind::SizeBelowMinimum, "size below 1 grid unit"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interpretation

enum class ApplyMode { Strict, Lenient };

/// Runs `seq` on a copy of `layout`. Strict mode refuses any sequence with
/// violations; lenient mode ignores transforms without a valid target and clamps
/// pos.y >= 0 and size >= 1.
inline GridLayout apply(const GridLayout& layout, const ActionSequence& seq, ApplyMode mode = ApplyMode::Strict) {
  if (mode == ApplyMode::Strict) {
    const auto violations = validate(seq, layout);
    if (!violations.empty())
      throw Error(ErrorCode::ApplyError,
                  "action " + std::to_string(violations.front().index) + ": " + violations.front().message);
  }
  GridLayout out = layout;
  const int n_theta = layout.config.n_theta;
  std::optional<std::size_t> target;
  for (const Action& a : seq) {
    if (std::holds_alternative<Stop>(a)) break;
    if (const auto* s = std::get_if<Select>(&a)) {
      if (s->target >= 0 && static_cast<std::size_t>(s->target) < out.objects.size())
        target = static_cast<std::size_t>(s->target);
      else
        target.reset();
      continue;
    }
    if (!target) continue;
    GridBox& g = out.objects[*target];
    if (const auto* m = std::get_if<Move>(&a)) {
      g.pos[0] += m->dx;
      g.pos[1] = std::max(0, g.pos[1] + m->dy);
      g.pos[2] += m->dz;
    } else if (const auto* r = std::get_if<RotateY>(&a)) {
      g.yaw_idx = (((g.yaw_idx + r->d) % n_theta) + n_theta) % n_theta;
    } else if (const auto* z = std::get_if<Resize>(&a)) {
      for (int& s : g.size) s = std::max(1, scaled_size(s, z->ds));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inversion

/// RESIZE parameter that best maps `from` back onto `to`. Starts from
/// round(10 * (to / from - 1)) on the largest component and searches nearby
/// values for the smallest L1 restoration error.
inline int inverse_resize(const IVec3& from, const IVec3& to) {
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (from[i] > from[k]) k = i;
  const int guess = static_cast<int>(std::lround(10.0 * (static_cast<double>(to[k]) / from[k] - 1.0)));
  int best = guess;
  long best_err = -1;
  for (int ds = guess - 2; ds <= guess + 2; ++ds) {
    if (ds <= -10) continue;
    long err = 0;
    for (int i = 0; i < 3; ++i) err += std::abs(std::max(1, scaled_size(from[i], ds)) - to[i]);
    const bool better = best_err < 0 || err < best_err ||
                        (err == best_err && std::abs(ds - guess) < std::abs(best - guess));
    if (better) {
      best = ds;
      best_err = err;
    }
  }
  return best;
}

/// Shortest chain of at most `max_steps` RESIZE parameters mapping `from`
/// exactly onto `to`; the single best parameter when no such chain exists.
/// Integer rounding often leaves no exact one-step inverse.
inline std::vector<int> inverse_resize_chain(const IVec3& from, const IVec3& to, int max_steps = 3) {
  if (from == to) return {};
  const int first = inverse_resize(from, to);
  std::vector<int> params{first};
  for (int ds = -9; ds <= 10; ++ds)
    if (ds != first && ds != 0) params.push_back(ds);
  auto step = [](IVec3 s, int ds) {
    for (int k = 0; k < 3; ++k) s[k] = std::max(1, scaled_size(s[k], ds));
    return s;
  };
  std::vector<int> chain;
  std::function<bool(const IVec3&, int)> search = [&](const IVec3& cur, int depth) {
    if (depth == 0) return false;
    for (int ds : params) {
      const IVec3 next = step(cur, ds);
      chain.push_back(ds);
      if (next == to || search(next, depth - 1)) return true;
      chain.pop_back();
    }
    return false;
  };
  for (int depth = 1; depth <= max_steps; ++depth) {
    chain.clear();
    if (search(from, depth)) return chain;
  }
  return {first};
}

inline std::set<int> touched_objects(const ActionSequence& seq) {
  std::set<int> out;
  std::optional<int> target;
  for (const Action& a : seq) {
    if (const auto* s = std::get_if<Select>(&a)) target = s->target;
    else if (is_transform(a) && target) out.insert(*target);
  }
  return out;
}

/// Corrective sequence undoing `perturbation`: per-object blocks in reverse
/// order, actions reversed within each block, parameters negated, terminated by
/// STOP. RESIZE is re-derived as a chain from the size actually reached since
/// scaling by (1 + d/10)(1 - d/10) is not the identity.
inline ActionSequence invert(const ActionSequence& perturbation, const GridLayout& original,
                             const GridLayout& perturbed) {
  if (original.objects.size() != perturbed.objects.size())
    throw Error(ErrorCode::MismatchedLayouts, "object counts differ");
  for (std::size_t i = 0; i < original.objects.size(); ++i)
    if (original.objects[i].id != perturbed.objects[i].id)
      throw Error(ErrorCode::MismatchedLayouts, "object ids differ at index " + std::to_string(i));

  struct Step {
    Action action;
    IVec3 size_before{};
    IVec3 size_after{};
  };
  struct Block {
    int target = 0;
    std::vector<Step> steps;
  };
  std::vector<Block> blocks;

  GridLayout state = original;
  bool have_target = false;
  for (const Action& a : perturbation) {
    if (std::holds_alternative<Stop>(a)) break;
    if (const auto* s = std::get_if<Select>(&a)) {
      have_target = s->target >= 0 && static_cast<std::size_t>(s->target) < state.objects.size();
      if (have_target) blocks.push_back({s->target, {}});
      continue;
    }
    if (!have_target) continue;
    const IVec3 before = state.objects[blocks.back().target].size;
    state = lap::apply(state, {Select{blocks.back().target}, a}, ApplyMode::Lenient);
    blocks.back().steps.push_back({a, before, state.objects[blocks.back().target].size});
  }

  ActionSequence out;
  GridLayout cur = perturbed;
  for (auto b = blocks.rbegin(); b != blocks.rend(); ++b) {
    if (b->steps.empty()) continue;
    out.push_back(Select{b->target});
    ActionSequence block;
    for (auto st = b->steps.rbegin(); st != b->steps.rend(); ++st) {
      if (const auto* m = std::get_if<Move>(&st->action)) {
        block.push_back(Move{-m->dx, -m->dy, -m->dz});
      } else if (const auto* r = std::get_if<RotateY>(&st->action)) {
        block.push_back(RotateY{-r->d});
      } else if (std::holds_alternative<Resize>(st->action)) {
        for (int ds : inverse_resize_chain(cur.objects[b->target].size, st->size_before)) {
          if (ds == 0) continue;
          block.push_back(Resize{ds});
          cur = lap::apply(cur, {Select{b->target}, block.back()}, ApplyMode::Lenient);
        }
      }
    }
    out.insert(out.end(), block.begin(), block.end());
  }
  out.push_back(Stop{});
  return out;
}

/// A sequence transforming `from` toward `to` object by object (positions and
/// yaw exactly, sizes exactly when a short RESIZE chain reaches them).
inline ActionSequence diff_sequence(const GridLayout& from, const GridLayout& to) {
  if (from.objects.size() != to.objects.size())
    throw Error(ErrorCode::MismatchedLayouts, "object counts differ");
  const int n = from.config.n_theta;
  ActionSequence out;
  for (std::size_t i = 0; i < from.objects.size(); ++i) {
    const GridBox& a = from.objects[i];
    const GridBox& b = to.objects[i];
    if (a.id != b.id) throw Error(ErrorCode::MismatchedLayouts, "object ids differ at index " + std::to_string(i));
    ActionSequence block;
    if (a.pos != b.pos) block.push_back(Move{b.pos[0] - a.pos[0], b.pos[1] - a.pos[1], b.pos[2] - a.pos[2]});
    if (a.yaw_idx != b.yaw_idx) {
      int d = ((b.yaw_idx - a.yaw_idx) % n + n) % n;
      if (d > n / 2) d -= n;
      block.push_back(RotateY{d});
    }
    if (a.size != b.size) {
      for (int ds : inverse_resize_chain(a.size, b.size))
        if (ds != 0) block.push_back(Resize{ds});
    }
    if (!block.empty()) {
      out.push_back(Select{static_cast<int>(i)});
      out.insert(out.end(), block.begin(), block.end());
    }
  }
  out.push_back(Stop{});
  return out;
}

} // namespace lap
