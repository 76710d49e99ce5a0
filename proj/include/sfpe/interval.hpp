#pragma once

#include <stdexcept>

namespace sfpe {

/// Real interval with independently open/closed endpoints.
struct Interval {
  double lo;
  double hi;
  bool lo_open;
  bool hi_open;

  static Interval open(double a, double b) { return {a, b, true, true}; }
  static Interval closed(double a, double b) { return {a, b, false, false}; }
  static Interval open_closed(double a, double b) { return {a, b, true, false}; }
  static Interval closed_open(double a, double b) { return {a, b, false, true}; }

  bool contains(double x) const {
    if (lo_open ? x <= lo : x < lo) return false;
    if (hi_open ? x >= hi : x > hi) return false;
    return true;
  }
};

}  // namespace sfpe
