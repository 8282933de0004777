#include "duet/util.hpp"

#include <chrono>
#include <cstring>
#include <stdexcept>

namespace duet {

namespace {

double simpson_panel(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole, double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson_panel(a, fa, m, fm, flm);
    double right = simpson_panel(m, fm, b, fb, frm);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
    if (a == b) return 0.0;
    double m = 0.5 * (a + b);
    double fa = f(a), fb = f(b), fm = f(m);
    double whole = simpson_panel(a, fa, b, fb, fm);
    return adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    size_t n = x_.size();
    if (n < 2 || n != y_.size()) throw std::invalid_argument("pchip: need >= 2 matching nodes");
    std::vector<double> h(n - 1), delta(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        if (h[i] <= 0.0) throw std::invalid_argument("pchip: nodes must increase");
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] > 0.0) {
            double w1 = 2.0 * h[i] + h[i - 1];
            double w2 = h[i] + 2.0 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    // One-sided endpoint slopes, clipped to preserve monotonicity.
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d * d0 <= 0.0) return 0.0;
        if (d0 * d1 < 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
        return d;
    };
    d_[0] = (n == 2) ? delta[0] : end_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = (n == 2) ? delta[n - 2]
                         : end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

double Pchip::operator()(double x) const {
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    size_t lo = 0, hi = x_.size() - 1;
    while (hi - lo > 1) {
        size_t mid = (lo + hi) / 2;
        (x_[mid] <= x ? lo : hi) = mid;
    }
    double h = x_[lo + 1] - x_[lo];
    double t = (x - x_[lo]) / h;
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * y_[lo] + h * h10 * d_[lo] + h01 * y_[lo + 1] + h * h11 * d_[lo + 1];
}

std::string fp17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void JsonWriter::comma() {
    if (!counts_.empty() && counts_.back()++ > 0) out_ += ",";
    out_ += "\n";
    indent();
}

void JsonWriter::indent() {
    for (int i = 0; i < depth_; ++i) out_ += "  ";
}

void JsonWriter::begin_object() {
    out_ += "{";
    counts_.push_back(0);
    ++depth_;
}

void JsonWriter::end_object() {
    counts_.pop_back();
    --depth_;
    out_ += "\n";
    indent();
    out_ += "}";
}

void JsonWriter::begin_array(const std::string& key) {
    comma();
    out_ += "\"" + key + "\": [";
    counts_.push_back(0);
    ++depth_;
}

void JsonWriter::begin_object(const std::string& key) {
    comma();
    out_ += "\"" + key + "\": {";
    counts_.push_back(0);
    ++depth_;
}

void JsonWriter::end_array() {
    counts_.pop_back();
    --depth_;
    out_ += "\n";
    indent();
    out_ += "]";
}

void JsonWriter::key_value(const std::string& key, double v) {
    comma();
    out_ += "\"" + key + "\": " + (std::isfinite(v) ? fp17(v) : std::string("null"));
}

void JsonWriter::key_value(const std::string& key, int v) {
    comma();
    out_ += "\"" + key + "\": " + std::to_string(v);
}

void JsonWriter::key_value(const std::string& key, long long v) {
    comma();
    out_ += "\"" + key + "\": " + std::to_string(v);
}

void JsonWriter::key_value(const std::string& key, bool v) {
    comma();
    out_ += "\"" + key + "\": " + (v ? "true" : "false");
}

void JsonWriter::key_value(const std::string& key, const std::string& v) {
    comma();
    std::string esc;
    for (char c : v) {
        if (c == '"' || c == '\\') esc += '\\';
        esc += c;
    }
    out_ += "\"" + key + "\": \"" + esc + "\"";
}

void JsonWriter::key_value(const std::string& key, const Vec3& v) {
    begin_array(key);
    for (double c : v) array_value(c);
    end_array();
}

void JsonWriter::array_value(double v) {
    comma();
    out_ += std::isfinite(v) ? fp17(v) : std::string("null");
}

void JsonWriter::object_in_array() {
    comma();
    out_ += "{";
    counts_.push_back(0);
    ++depth_;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace duet
