#pragma once

#include <vector>

namespace gridrl {

double mean(const std::vector<double>& v);
// Sample standard deviation (n-1 denominator); 0 by convention when n < 2.
double sample_std(const std::vector<double>& v);

// Regularized incomplete beta I_x(a, b) via Lentz continued fraction;
// converges well past 1e-10 absolute accuracy.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided p-value of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, int df);

struct TTestResult {
    double t = 0.0;
    int df = 0;
    double p = 1.0;
    bool zero_variance = false;
};

// Paired t-test on d = a - b. Zero-variance differences report p = 1.0 when
// mean(d) = 0, else the p -> 0 sentinel with the flag set.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct WinCount {
    int wins_a = 0;
    int wins_b = 0;
    int ties = 0;
};

// Strict per-scenario comparison; ties counted separately.
WinCount win_rate(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gridrl
