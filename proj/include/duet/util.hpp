#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace duet {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Squared distance to the z-axis: r^2(x) = x1^2 + x2^2.
inline double r2_axis(const Vec3& x) { return x[0] * x[0] + x[1] * x[1]; }

// Compensated accumulator; keeps reductions deterministic and accurate
// independent of grid size.
class KahanSum {
public:
    void add(double v) {
        double y = v - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-11, int max_depth = 40);

// Monotone cubic (Fritsch-Carlson) interpolant on strictly increasing nodes.
class Pchip {
public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> y);
    double operator()(double x) const;

private:
    std::vector<double> x_, y_, d_;
};

// Shortest text that round-trips a double (17 significant digits).
std::string fp17(double v);

// Minimal JSON emitter; all numbers written via fp17.
class JsonWriter {
public:
    void begin_object();
    void end_object();
    void begin_array(const std::string& key);
    void begin_object(const std::string& key);
    void end_array();
    void key_value(const std::string& key, double v);
    void key_value(const std::string& key, int v);
    void key_value(const std::string& key, long long v);
    void key_value(const std::string& key, bool v);
    void key_value(const std::string& key, const std::string& v);
    void key_value(const std::string& key, const Vec3& v);
    void array_value(double v);
    void object_in_array();
    std::string str() const { return out_; }

private:
    void comma();
    void indent();
    std::string out_;
    std::vector<int> counts_;
    int depth_ = 0;
};

std::string utc_timestamp();

}  // namespace duet
