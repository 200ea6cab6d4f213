#include "dgs/objective.hpp"

#include "dgs/error.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace dgs {

namespace {

using Plane = std::vector<double>;

std::array<double, kSsimWindow> gaussian_window() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double &v : w) v /= sum;
    return w;
}

// Separable valid-mode correlation: (h, w) -> (h - 10, w - 10).
Plane correlate_valid(const Plane &in, int w, int h, const std::array<double, kSsimWindow> &k) {
    const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    Plane rows(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
            rows[static_cast<std::size_t>(y) * ow + x] = s;
        }
    Plane out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

// Adjoint of correlate_valid: (h - 10, w - 10) -> (h, w).
Plane correlate_adjoint(const Plane &in, int w, int h, const std::array<double, kSsimWindow> &k) {
    const int iw = w - kSsimWindow + 1, ih = h - kSsimWindow + 1;
    Plane cols(static_cast<std::size_t>(h) * iw, 0.0);
    for (int y = 0; y < ih; ++y)
        for (int x = 0; x < iw; ++x) {
            const double v = in[static_cast<std::size_t>(y) * iw + x];
            for (int i = 0; i < kSsimWindow; ++i) cols[static_cast<std::size_t>(y + i) * iw + x] += k[i] * v;
        }
    Plane out(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < iw; ++x) {
            const double v = cols[static_cast<std::size_t>(y) * iw + x];
            for (int i = 0; i < kSsimWindow; ++i) out[static_cast<std::size_t>(y) * w + x + i] += k[i] * v;
        }
    return out;
}

Plane channel(const Image &img, int c) {
    Plane p(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
    return p;
}

void require_same_shape(const Image &a, const Image &b, const char *what) {
    if (!a.same_shape(b) || a.size() == 0) {
        fail(ErrorCode::InvalidArgument, std::string(what) + ": image shapes differ or are empty");
    }
}

// Mean SSIM; when grad is non-null, adds d(mean SSIM)/da scaled by grad_scale.
double ssim_impl(const Image &a, const Image &b, Image *grad, double grad_scale) {
    require_same_shape(a, b, "ssim");
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        fail(ErrorCode::InvalidArgument, "ssim: image is smaller than the 11x11 window");
    }
    const auto k = gaussian_window();
    const int w = a.width, h = a.height;
    const std::size_t m = static_cast<std::size_t>(w - kSsimWindow + 1) * (h - kSsimWindow + 1);
    const double norm = 1.0 / (static_cast<double>(m) * a.channels);
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        const Plane x = channel(a, c), y = channel(b, c);
        Plane xx(x.size()), yy(x.size()), xy(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const Plane mu_x = correlate_valid(x, w, h, k), mu_y = correlate_valid(y, w, h, k);
        const Plane e_xx = correlate_valid(xx, w, h, k), e_yy = correlate_valid(yy, w, h, k);
        const Plane e_xy = correlate_valid(xy, w, h, k);
        Plane ga, gb, gc;
        if (grad) {
            ga.assign(m, 0.0);
            gb.assign(m, 0.0);
            gc.assign(m, 0.0);
        }
        for (std::size_t p = 0; p < m; ++p) {
            const double mx = mu_x[p], my = mu_y[p];
            const double vx = e_xx[p] - mx * mx, vy = e_yy[p] - my * my, cxy = e_xy[p] - mx * my;
            const double n1 = 2.0 * mx * my + kSsimC1, n2 = 2.0 * cxy + kSsimC2;
            const double d1 = mx * mx + my * my + kSsimC1, d2 = vx + vy + kSsimC2;
            const double s = (n1 * n2) / (d1 * d2);
            total += s;
            if (grad) {
                const double ds_dmx = s * (2.0 * my / n1 - 2.0 * mx / d1);
                const double ds_dvx = -s / d2;
                const double ds_dcxy = 2.0 * s / n2;
                ga[p] = grad_scale * norm * (ds_dmx - 2.0 * ds_dvx * mx - ds_dcxy * my);
                gb[p] = grad_scale * norm * 2.0 * ds_dvx;
                gc[p] = grad_scale * norm * ds_dcxy;
            }
        }
        if (grad) {
            const Plane ta = correlate_adjoint(ga, w, h, k);
            const Plane tb = correlate_adjoint(gb, w, h, k);
            const Plane tc = correlate_adjoint(gc, w, h, k);
            for (std::size_t i = 0; i < x.size(); ++i) {
                grad->data[i * a.channels + c] += ta[i] + tb[i] * x[i] + tc[i] * y[i];
            }
        }
    }
    return total * norm;
}

} // namespace

LossReport compute_loss(const Image &rendered, const Image &target, double lambda_ssim) {
    require_same_shape(rendered, target, "compute_loss");
    LossReport report;
    report.d_total_d_rgb = Image(rendered.width, rendered.height, rendered.channels);
    const double inv_n = 1.0 / static_cast<double>(rendered.size());
    double l1 = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        l1 += std::abs(d);
        const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        report.d_total_d_rgb.data[i] = (1.0 - lambda_ssim) * sign * inv_n;
    }
    report.l1 = l1 * inv_n;
    if (lambda_ssim != 0.0) {
        // d dssim / d ssim = -1/2
        const double s = ssim_impl(rendered, target, &report.d_total_d_rgb, -0.5 * lambda_ssim);
        report.dssim = 0.5 * (1.0 - s);
    } else if (rendered.width >= kSsimWindow && rendered.height >= kSsimWindow) {
        report.dssim = 0.5 * (1.0 - ssim_impl(rendered, target, nullptr, 0.0));
    }
    report.total = (1.0 - lambda_ssim) * report.l1 + lambda_ssim * report.dssim;
    return report;
}

double psnr(const Image &a, const Image &b) {
    require_same_shape(a, b, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image &a, const Image &b) { return ssim_impl(a, b, nullptr, 0.0); }

double l2_loss(const Image &a, const Image &b, Image *d_a) {
    require_same_shape(a, b, "l2_loss");
    if (d_a) *d_a = Image(a.width, a.height, a.channels);
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        total += d * d;
        if (d_a) d_a->data[i] = 2.0 * d;
    }
    return total;
}

} // namespace dgs
