#include "rrecon/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rrecon/errors.hpp"
#include "rrecon/parallel.hpp"
#include "rrecon/rng.hpp"

namespace rrecon {

namespace {
using ordered_json = nlohmann::ordered_json;
}

std::vector<int> ModelConfig::schedule() const {
    if (!channels.empty()) return channels;
    std::vector<int> s{width + 4, width + 4};
    for (int c = width + 4; c > 1; c /= 2) s.push_back(c / 2 > 0 ? c / 2 : 1);
    if (s.back() != 1) s.push_back(1);
    return s;
}

void ModelConfig::validate() const {
    if (n_indices < 0) throw ConfigError("n_indices must be non-negative");
    if (width < 1) throw ConfigError("width must be positive");
    if (kernel != 3) throw ConfigError("only 3x3 convolutions are supported");
    const std::vector<int> s = schedule();
    if (s.size() < 2) throw ConfigError("channel schedule needs at least one block");
    if (s.front() != width + 4)
        throw ConfigError("channel schedule must start at width + 4 static layers");
    if (s.back() != 1) throw ConfigError("channel schedule must end at 1");
    for (int c : s)
        if (c < 1) throw ConfigError("channel counts must be positive");
    if (!(year_scale > 0.0)) throw ConfigError("year_scale must be positive");
}

namespace detail {

LayerPlan make_plan(const ModelConfig& cfg) {
    cfg.validate();
    LayerPlan plan;
    plan.width = cfg.width;
    plan.input_dim = cfg.input_dim();
    std::size_t off = 0;
    const auto affine = [&off](int in, int out) {
        AffineDesc d;
        d.in = in;
        d.out = out;
        d.w = off;
        off += std::size_t(in) * out;
        d.b = off;
        off += out;
        return d;
    };
    plan.lin_in = affine(plan.input_dim, cfg.width);
    for (auto& r : plan.res) r = affine(cfg.width, cfg.width);

    const std::vector<int> s = cfg.schedule();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        ConvBlockDesc b;
        b.cin = s[i];
        b.cout = s[i + 1];
        b.conv1 = affine(b.cin * 9, b.cout);
        b.conv2 = affine(b.cout * 9, b.cout);
        b.has_skip = b.cin != b.cout;
        if (b.has_skip) b.skip = affine(b.cin, b.cout);
        b.final_linear = i + 2 == s.size();
        plan.blocks.push_back(b);
    }
    plan.n_params = off;
    return plan;
}

} // namespace detail

std::size_t model_parameter_count(const ModelConfig& cfg) { return detail::make_plan(cfg).n_params; }

std::vector<double> encode_inputs(std::span<const double> indices, int year, int month,
                                  const ModelConfig& cfg) {
    if (static_cast<int>(indices.size()) != cfg.n_indices)
        throw ConfigError("index count does not match model config");
    if (month < 1 || month > 12) throw ConfigError("month out of range");
    std::vector<double> x;
    x.reserve(cfg.input_dim());
    x.insert(x.end(), indices.begin(), indices.end());
    x.push_back((double(year) - cfg.year_offset) / cfg.year_scale);
    for (int m = 1; m <= 12; ++m) x.push_back(m == month ? 1.0 : 0.0);
    return x;
}

double mse_loss(std::span<const double> pred, std::span<const double> target,
                const std::vector<std::uint8_t>* mask) {
    if (pred.size() != target.size()) throw ConfigError("pred/target shape mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        const double d = pred[i] - target[i];
        acc += d * d;
        ++n;
    }
    if (n == 0) throw ConfigError("empty mask");
    return acc / double(n);
}

// ---------------------------------------------------------------------------
// network kernels

namespace {

template <typename T>
void affine_forward(const T* w, const T* b, const T* x, T* y, int in, int out) {
    for (int o = 0; o < out; ++o) {
        T acc = b[o];
        const T* row = w + std::size_t(o) * in;
        for (int i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

// dY -> accumulate dW, dB, dX (dX may be null)
template <typename T>
void affine_backward(const T* w, const T* x, const T* dy, T* dw, T* db, T* dx, int in, int out) {
    for (int o = 0; o < out; ++o) {
        const T g = dy[o];
        db[o] += g;
        T* wrow = dw + std::size_t(o) * in;
        for (int i = 0; i < in; ++i) wrow[i] += g * x[i];
    }
    if (dx) {
        for (int i = 0; i < in; ++i) {
            T acc = 0;
            for (int o = 0; o < out; ++o) acc += w[std::size_t(o) * in + i] * dy[o];
            dx[i] += acc;
        }
    }
}

template <typename T>
void conv3_forward(const T* w, const T* b, const T* in, T* out, int cin, int cout, int H, int W) {
    const int Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    for (int co = 0; co < cout; ++co) {
        T* op = out + std::size_t(co) * plane;
        for (int y = 0; y < H; ++y) {
            T* row = op + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) row[x] = b[co];
        }
        for (int ci = 0; ci < cin; ++ci) {
            const T* ip = in + std::size_t(ci) * plane;
            const T* wk = w + (std::size_t(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const T wv = wk[ky * 3 + kx];
                    for (int y = 0; y < H; ++y) {
                        const T* irow = ip + std::size_t(y + ky) * Wp + kx;
                        T* orow = op + std::size_t(y + 1) * Wp + 1;
                        for (int x = 0; x < W; ++x) orow[x] += wv * irow[x];
                    }
                }
        }
    }
}

// dOut (padded, interior valid) -> accumulate dW, dB and scatter dIn
template <typename T>
void conv3_backward(const T* w, const T* in, const T* dout, T* dw, T* db, T* din, int cin, int cout,
                    int H, int W) {
    const int Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    for (int co = 0; co < cout; ++co) {
        const T* gp = dout + std::size_t(co) * plane;
        T acc_b = 0;
        for (int y = 0; y < H; ++y) {
            const T* grow = gp + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) acc_b += grow[x];
        }
        db[co] += acc_b;
        for (int ci = 0; ci < cin; ++ci) {
            const T* ip = in + std::size_t(ci) * plane;
            T* dip = din ? din + std::size_t(ci) * plane : nullptr;
            const T* wk = w + (std::size_t(co) * cin + ci) * 9;
            T* dwk = dw + (std::size_t(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    T acc_w = 0;
                    const T wv = wk[ky * 3 + kx];
                    for (int y = 0; y < H; ++y) {
                        const T* irow = ip + std::size_t(y + ky) * Wp + kx;
                        const T* grow = gp + std::size_t(y + 1) * Wp + 1;
                        if (dip) {
                            T* drow = dip + std::size_t(y + ky) * Wp + kx;
                            for (int x = 0; x < W; ++x) {
                                acc_w += grow[x] * irow[x];
                                drow[x] += wv * grow[x];
                            }
                        } else {
                            for (int x = 0; x < W; ++x) acc_w += grow[x] * irow[x];
                        }
                    }
                    dwk[ky * 3 + kx] += acc_w;
                }
        }
    }
}

template <typename T>
void conv1x1_forward_add(const T* w, const T* b, const T* in, T* out, int cin, int cout, int H,
                         int W) {
    const int Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    for (int co = 0; co < cout; ++co) {
        T* op = out + std::size_t(co) * plane;
        for (int y = 0; y < H; ++y) {
            T* row = op + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) row[x] += b[co];
        }
        for (int ci = 0; ci < cin; ++ci) {
            const T wv = w[std::size_t(co) * cin + ci];
            const T* ip = in + std::size_t(ci) * plane;
            for (int y = 0; y < H; ++y) {
                const T* irow = ip + std::size_t(y + 1) * Wp + 1;
                T* orow = op + std::size_t(y + 1) * Wp + 1;
                for (int x = 0; x < W; ++x) orow[x] += wv * irow[x];
            }
        }
    }
}

template <typename T>
void conv1x1_backward(const T* w, const T* in, const T* dout, T* dw, T* db, T* din, int cin,
                      int cout, int H, int W) {
    const int Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    for (int co = 0; co < cout; ++co) {
        const T* gp = dout + std::size_t(co) * plane;
        T acc_b = 0;
        for (int y = 0; y < H; ++y) {
            const T* grow = gp + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) acc_b += grow[x];
        }
        db[co] += acc_b;
        for (int ci = 0; ci < cin; ++ci) {
            const T* ip = in + std::size_t(ci) * plane;
            T* dip = din + std::size_t(ci) * plane;
            const T wv = w[std::size_t(co) * cin + ci];
            T acc_w = 0;
            for (int y = 0; y < H; ++y) {
                const T* irow = ip + std::size_t(y + 1) * Wp + 1;
                const T* grow = gp + std::size_t(y + 1) * Wp + 1;
                T* drow = dip + std::size_t(y + 1) * Wp + 1;
                for (int x = 0; x < W; ++x) {
                    acc_w += grow[x] * irow[x];
                    drow[x] += wv * grow[x];
                }
            }
            dw[std::size_t(co) * cin + ci] += acc_w;
        }
    }
}

template <typename T>
void add_plane_identity(const T* in, T* out, int c, int H, int W) {
    const int Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < H; ++y) {
            const T* irow = in + std::size_t(ch) * plane + std::size_t(y + 1) * Wp + 1;
            T* orow = out + std::size_t(ch) * plane + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) orow[x] += irow[x];
        }
}

template <typename T>
void relu_planes(T* p, int c, int H, int W) {
    const int Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < H; ++y) {
            T* row = p + std::size_t(ch) * plane + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) row[x] = row[x] > T(0) ? row[x] : T(0);
        }
}

// dP *= (act > 0), interior only
template <typename T>
void relu_mask_planes(const T* act, T* dp, int c, int H, int W) {
    const int Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < H; ++y) {
            const T* arow = act + std::size_t(ch) * plane + std::size_t(y + 1) * Wp + 1;
            T* drow = dp + std::size_t(ch) * plane + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) drow[x] = arow[x] > T(0) ? drow[x] : T(0);
        }
}

template <typename T>
void zero_borders(T* p, int c, int H, int W) {
    const int Wp = W + 2, Hp = H + 2;
    const std::size_t plane = std::size_t(Hp) * Wp;
    for (int ch = 0; ch < c; ++ch) {
        T* pp = p + std::size_t(ch) * plane;
        for (int x = 0; x < Wp; ++x) {
            pp[x] = T(0);
            pp[std::size_t(Hp - 1) * Wp + x] = T(0);
        }
        for (int y = 0; y < Hp; ++y) {
            pp[std::size_t(y) * Wp] = T(0);
            pp[std::size_t(y) * Wp + Wp - 1] = T(0);
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// ReconNet

template <typename T>
ReconNet<T>::ReconNet(ModelConfig cfg) : cfg_(std::move(cfg)), plan_(detail::make_plan(cfg_)) {
    params_.assign(plan_.n_params, T(0));
}

template <typename T>
void ReconNet<T>::init_params(std::uint64_t seed) {
    Rng rng(seed);
    const auto fill_affine = [&](const detail::AffineDesc& d, int fan_in) {
        const double s = std::sqrt(1.0 / double(fan_in));
        for (std::size_t i = 0; i < std::size_t(d.in) * d.out; ++i)
            params_[d.w + i] = static_cast<T>(rng.uniform(-s, s));
        for (int i = 0; i < d.out; ++i) params_[d.b + i] = T(0);
    };
    fill_affine(plan_.lin_in, plan_.lin_in.in);
    for (const auto& r : plan_.res) fill_affine(r, r.in);
    for (const auto& b : plan_.blocks) {
        fill_affine(b.conv1, b.cin * 9);
        fill_affine(b.conv2, b.cout * 9);
        if (b.has_skip) fill_affine(b.skip, b.cin);
    }
}

template <typename T>
void ReconNet<T>::set_static(const StaticStack& stat) {
    H_ = stat.grid.nlat();
    W_ = stat.grid.nlon();
    const int Wp = W_ + 2;
    const std::size_t plane = std::size_t(H_ + 2) * Wp;
    static_planes_.assign(4 * plane, T(0));
    for (int l = 0; l < 4; ++l) {
        const Field2& f = stat.layer(l);
        for (int y = 0; y < H_; ++y)
            for (int x = 0; x < W_; ++x)
                static_planes_[std::size_t(l) * plane + std::size_t(y + 1) * Wp + (x + 1)] =
                    static_cast<T>(f.at(y, x));
    }
}

template <typename T>
void ReconNet<T>::ensure_workspace(Workspace<T>& ws) const {
    if (H_ == 0) throw ConfigError("static stack not set");
    const std::size_t plane = std::size_t(H_ + 2) * (W_ + 2);
    std::size_t planes = std::size_t(cfg_.width) + 4;
    for (const auto& b : plan_.blocks) planes += 2 * std::size_t(b.cout);
    const std::size_t vec = 5 * std::size_t(cfg_.width);
    if (ws.H == H_ && ws.W == W_ && ws.planes.size() == planes * plane) return;
    ws.H = H_;
    ws.W = W_;
    ws.vec.assign(vec, T(0));
    ws.dvec.assign(vec, T(0));
    ws.planes.assign(planes * plane, T(0));
    ws.dplanes.assign(planes * plane, T(0));
    ws.output.assign(std::size_t(H_) * W_, T(0));
    ws.doutput.assign(std::size_t(H_) * W_, T(0));
}

template <typename T>
void ReconNet<T>::forward(std::span<const T> input, Workspace<T>& ws) const {
    ensure_workspace(ws);
    if (static_cast<int>(input.size()) != plan_.input_dim)
        throw ConfigError("input dimension mismatch");
    const int N = cfg_.width;
    const int H = H_, W = W_, Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    const T* P = params_.data();

    // linear head: a1, then two residual blocks (v, o) each
    T* a1 = ws.vec.data();
    T* v1 = a1 + N;
    T* o1 = v1 + N;
    T* v2 = o1 + N;
    T* o2 = v2 + N;
    affine_forward(P + plan_.lin_in.w, P + plan_.lin_in.b, input.data(), a1, plan_.input_dim, N);
    for (int i = 0; i < N; ++i) a1[i] = a1[i] > T(0) ? a1[i] : T(0);

    const auto res_block = [&](const detail::AffineDesc& A1, const detail::AffineDesc& A2,
                               const T* x, T* v, T* o) {
        affine_forward(P + A1.w, P + A1.b, x, v, N, N);
        for (int i = 0; i < N; ++i) v[i] = v[i] > T(0) ? v[i] : T(0);
        affine_forward(P + A2.w, P + A2.b, v, o, N, N);
        for (int i = 0; i < N; ++i) {
            o[i] += x[i];
            o[i] = o[i] > T(0) ? o[i] : T(0);
        }
    };
    res_block(plan_.res[0], plan_.res[1], a1, v1, o1);
    res_block(plan_.res[2], plan_.res[3], o1, v2, o2);

    // broadcast embedding + static layers
    T* X0 = ws.planes.data();
    for (int c = 0; c < N; ++c) {
        const T val = o2[c];
        for (int y = 0; y < H; ++y) {
            T* row = X0 + std::size_t(c) * plane + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) row[x] = val;
        }
    }
    std::memcpy(X0 + std::size_t(N) * plane, static_planes_.data(), 4 * plane * sizeof(T));

    const T* cur = X0;
    T* buf = X0 + (std::size_t(N) + 4) * plane;
    for (const auto& b : plan_.blocks) {
        T* V = buf;
        T* O = buf + std::size_t(b.cout) * plane;
        conv3_forward(P + b.conv1.w, P + b.conv1.b, cur, V, b.cin, b.cout, H, W);
        relu_planes(V, b.cout, H, W);
        conv3_forward(P + b.conv2.w, P + b.conv2.b, V, O, b.cout, b.cout, H, W);
        if (b.has_skip)
            conv1x1_forward_add(P + b.skip.w, P + b.skip.b, cur, O, b.cin, b.cout, H, W);
        else
            add_plane_identity(cur, O, b.cout, H, W);
        if (!b.final_linear) relu_planes(O, b.cout, H, W);
        cur = O;
        buf = O + std::size_t(b.cout) * plane;
    }

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) ws.output[std::size_t(y) * W + x] = cur[std::size_t(y + 1) * Wp + (x + 1)];
}

template <typename T>
void ReconNet<T>::backward(std::span<const T> input, Workspace<T>& ws, std::vector<T>& grad) const {
    if (grad.size() != plan_.n_params) throw ConfigError("gradient buffer size mismatch");
    const int N = cfg_.width;
    const int H = H_, W = W_, Wp = W + 2;
    const std::size_t plane = std::size_t(H + 2) * Wp;
    const T* P = params_.data();
    T* G = grad.data();

    std::fill(ws.dplanes.begin(), ws.dplanes.end(), T(0));
    std::fill(ws.dvec.begin(), ws.dvec.end(), T(0));

    // activation buffer offsets, mirrored in dplanes
    const T* X0 = ws.planes.data();
    std::vector<const T*> Vs(plan_.blocks.size()), Os(plan_.blocks.size());
    std::vector<const T*> ins(plan_.blocks.size());
    {
        const T* cur = X0;
        const T* buf = X0 + (std::size_t(N) + 4) * plane;
        for (std::size_t i = 0; i < plan_.blocks.size(); ++i) {
            const auto& b = plan_.blocks[i];
            ins[i] = cur;
            Vs[i] = buf;
            Os[i] = buf + std::size_t(b.cout) * plane;
            cur = Os[i];
            buf = Os[i] + std::size_t(b.cout) * plane;
        }
    }
    const auto dbuf = [&](const T* act) { return ws.dplanes.data() + (act - ws.planes.data()); };

    // seed the last block's output gradient from ws.doutput
    {
        T* dO = dbuf(Os.back());
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                dO[std::size_t(y + 1) * Wp + (x + 1)] = ws.doutput[std::size_t(y) * W + x];
    }

    for (std::size_t bi = plan_.blocks.size(); bi-- > 0;) {
        const auto& b = plan_.blocks[bi];
        T* dO = dbuf(Os[bi]);
        T* dV = dbuf(Vs[bi]);
        T* dIn = dbuf(ins[bi]);
        if (!b.final_linear) relu_mask_planes(Os[bi], dO, b.cout, H, W); // now d(pre)
        // skip path
        if (b.has_skip)
            conv1x1_backward(P + b.skip.w, ins[bi], dO, G + b.skip.w, G + b.skip.b, dIn, b.cin,
                             b.cout, H, W);
        else
            add_plane_identity(dO, dIn, b.cout, H, W);
        // conv2 path
        conv3_backward(P + b.conv2.w, Vs[bi], dO, G + b.conv2.w, G + b.conv2.b, dV, b.cout, b.cout,
                       H, W);
        zero_borders(dV, b.cout, H, W);
        relu_mask_planes(Vs[bi], dV, b.cout, H, W);
        conv3_backward(P + b.conv1.w, ins[bi], dV, G + b.conv1.w, G + b.conv1.b, dIn, b.cin, b.cout,
                       H, W);
        zero_borders(dIn, b.cin, H, W);
    }

    // embedding gradient
    T* dX0 = ws.dplanes.data();
    T* da1 = ws.dvec.data();
    T* dv1 = da1 + N;
    T* do1 = dv1 + N;
    T* dv2 = do1 + N;
    T* do2 = dv2 + N;
    for (int c = 0; c < N; ++c) {
        T acc = 0;
        for (int y = 0; y < H; ++y) {
            const T* row = dX0 + std::size_t(c) * plane + std::size_t(y + 1) * Wp + 1;
            for (int x = 0; x < W; ++x) acc += row[x];
        }
        do2[c] = acc;
    }

    const T* a1 = ws.vec.data();
    const T* v1 = a1 + N;
    const T* o1 = v1 + N;
    const T* v2 = o1 + N;
    const T* o2 = v2 + N;

    const auto res_backward = [&](const detail::AffineDesc& A1, const detail::AffineDesc& A2,
                                  const T* x, const T* v, const T* o, T* dout, T* dv, T* dx) {
        for (int i = 0; i < N; ++i) dout[i] = o[i] > T(0) ? dout[i] : T(0); // d(pre)
        affine_backward(P + A2.w, v, dout, G + A2.w, G + A2.b, dv, N, N);
        for (int i = 0; i < N; ++i) dv[i] = v[i] > T(0) ? dv[i] : T(0);
        affine_backward(P + A1.w, x, dv, G + A1.w, G + A1.b, dx, N, N);
        for (int i = 0; i < N; ++i) dx[i] += dout[i]; // identity skip
    };
    res_backward(plan_.res[2], plan_.res[3], o1, v2, o2, do2, dv2, do1);
    res_backward(plan_.res[0], plan_.res[1], a1, v1, o1, do1, dv1, da1);

    for (int i = 0; i < N; ++i) da1[i] = a1[i] > T(0) ? da1[i] : T(0);
    affine_backward(P + plan_.lin_in.w, input.data(), da1, G + plan_.lin_in.w, G + plan_.lin_in.b,
                    static_cast<T*>(nullptr), plan_.input_dim, N);
}

template class ReconNet<float>;
template class ReconNet<double>;

// ---------------------------------------------------------------------------
// training

void TrainSplit::validate() const {
    if (train_start.index() > train_end.index() || val_start.index() > val_end.index() ||
        test_start.index() > test_end.index())
        throw ConfigError("split periods must be non-empty");
    if (train_end.index() >= val_start.index() && train_start.index() <= val_end.index())
        throw ConfigError("training period overlaps validation period");
}

bool TrainSplit::validation_inside_test() const {
    return val_start.index() >= test_start.index() && val_end.index() <= test_end.index();
}

Dataset Dataset::build(const IndexSeries& monthly_indices, const GridField& monthly_target,
                       const StaticStack& stat, const ModelConfig& cfg, bool land_only) {
    cfg.validate();
    if (monthly_target.times.kind != TimeKind::monthly) throw ConfigError("monthly target required");
    if (monthly_target.grid != stat.grid) throw ConfigError("target/static grid mismatch");
    if (cfg.n_indices > 0 && monthly_indices.k() != cfg.n_indices)
        throw ConfigError("index series width does not match model config");

    Dataset d;
    d.config = cfg;
    d.static_stack = stat;
    if (land_only) {
        std::vector<std::uint8_t> mask(stat.grid.npoints());
        for (std::size_t p = 0; p < mask.size(); ++p)
            mask[p] = stat.land_mask.v[p] >= kLandThreshold ? 1 : 0;
        d.pixel_mask = std::move(mask);
    }

    const std::size_t np = monthly_target.plane();
    for (std::size_t t = 0; t < monthly_target.ntime(); ++t) {
        const Date stamp = monthly_target.times.stamps[t];
        std::vector<double> idx(cfg.n_indices, 0.0);
        if (cfg.n_indices > 0) {
            const std::ptrdiff_t row = monthly_indices.dates.find(Date{stamp.y, stamp.m, 1});
            if (row < 0) continue; // months without indices are dropped
            for (int j = 0; j < cfg.n_indices; ++j) idx[j] = monthly_indices.at(row, j);
        }
        MonthSample s;
        s.stamp = stamp;
        s.input = encode_inputs(idx, stamp.y, stamp.m, cfg);
        s.target.assign(monthly_target.values.begin() + t * np,
                        monthly_target.values.begin() + (t + 1) * np);
        d.samples.push_back(std::move(s));
    }
    if (d.samples.empty()) throw ConfigError("dataset is empty");
    return d;
}

namespace {

template <typename T>
struct CastSamples {
    std::vector<std::vector<T>> inputs;
    std::vector<std::vector<T>> targets;
};

template <typename T>
TrainedModel train_one(const Dataset& data, const CastSamples<T>& cast,
                       const std::vector<std::size_t>& train_idx,
                       const std::vector<std::size_t>& val_idx, const TrainOptions& opt,
                       std::uint64_t model_seed) {
    ReconNet<T> net(data.config);
    net.set_static(data.static_stack);
    net.init_params(splitmix64(model_seed));
    Rng shuffle_rng = Rng(model_seed).substream(1);

    Workspace<T> ws;
    net.ensure_workspace(ws);
    const std::size_t npx = ws.output.size();
    const std::uint8_t* mask = data.pixel_mask ? data.pixel_mask->data() : nullptr;
    std::size_t n_active = npx;
    if (mask) {
        n_active = 0;
        for (std::size_t p = 0; p < npx; ++p) n_active += mask[p] ? 1 : 0;
        if (n_active == 0) throw ConfigError("empty mask");
    }

    const std::size_t n_params = net.n_params();
    std::vector<T> grad(n_params, T(0)), m(n_params, T(0)), v(n_params, T(0));
    std::vector<T> best_params = net.params();
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    std::uint64_t adam_t = 0;

    const auto eval_mse = [&](const std::vector<std::size_t>& idx) {
        double acc = 0.0;
        for (const std::size_t i : idx) {
            net.forward(cast.inputs[i], ws);
            const auto& tgt = cast.targets[i];
            for (std::size_t p = 0; p < npx; ++p) {
                if (mask && !mask[p]) continue;
                const double d = double(ws.output[p]) - double(tgt[p]);
                acc += d * d;
            }
        }
        return acc / (double(n_active) * double(idx.size()));
    };

    TrainedModel out;
    out.config = data.config;
    out.seed = model_seed;

    std::vector<std::size_t> order = train_idx;
    const std::size_t batch =
        opt.batch_size <= 0 ? order.size() : std::min<std::size_t>(opt.batch_size, order.size());
    int wait = 0;

    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        if (epoch == 0) {
            std::uint64_t h = 0xcbf29ce484222325ull;
            for (const std::size_t i : order) {
                h ^= i;
                h *= 0x100000001b3ull;
            }
            out.shuffle_fingerprint = h;
        }

        double train_sq = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            std::fill(grad.begin(), grad.end(), T(0));
            const T scale = T(2.0 / (double(n_active) * double(stop - start)));
            for (std::size_t s = start; s < stop; ++s) {
                const std::size_t i = order[s];
                net.forward(cast.inputs[i], ws);
                const auto& tgt = cast.targets[i];
                for (std::size_t p = 0; p < npx; ++p) {
                    if (mask && !mask[p]) {
                        ws.doutput[p] = T(0);
                        continue;
                    }
                    const T r = ws.output[p] - tgt[p];
                    train_sq += double(r) * double(r);
                    ws.doutput[p] = scale * r;
                }
                net.backward(cast.inputs[i], ws, grad);
            }
            // Adam step
            ++adam_t;
            const double b1t = 1.0 - std::pow(opt.beta1, double(adam_t));
            const double b2t = 1.0 - std::pow(opt.beta2, double(adam_t));
            const T lr = T(opt.lr);
            const T beta1 = T(opt.beta1), beta2 = T(opt.beta2), eps = T(opt.eps);
            T* P = net.params().data();
            for (std::size_t p = 0; p < n_params; ++p) {
                m[p] = beta1 * m[p] + (T(1) - beta1) * grad[p];
                v[p] = beta2 * v[p] + (T(1) - beta2) * grad[p] * grad[p];
                const T mh = m[p] / T(b1t);
                const T vh = v[p] / T(b2t);
                P[p] -= lr * mh / (std::sqrt(vh) + eps);
            }
        }
        const double train_mse = train_sq / (double(n_active) * double(order.size()));
        const double val_mse = eval_mse(val_idx);
        if (!std::isfinite(train_mse) || !std::isfinite(val_mse))
            throw NumericError("training diverged (seed " + std::to_string(model_seed) + ", epoch " +
                               std::to_string(epoch) + ")");
        out.history.push_back({epoch, train_mse, val_mse});

        if (val_mse < best_val) {
            best_val = val_mse;
            best_epoch = epoch;
            best_params = net.params();
            wait = 0;
        } else if (++wait >= opt.patience) {
            break;
        }
    }

    out.stop_epoch = best_epoch;
    out.best_val_mse = best_val;
    out.params.assign(best_params.begin(), best_params.end());
    return out;
}

} // namespace

template <typename T>
std::vector<TrainedModel> train(const Dataset& data, const TrainSplit& split,
                                const TrainOptions& opt) {
    split.validate();
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const int ym = year_month(data.samples[i].stamp).index();
        if (ym >= split.train_start.index() && ym <= split.train_end.index()) train_idx.push_back(i);
        if (ym >= split.val_start.index() && ym <= split.val_end.index()) val_idx.push_back(i);
    }
    if (train_idx.empty()) throw ConfigError("no training samples inside split");
    if (val_idx.empty()) throw ConfigError("no validation samples inside split");

    CastSamples<T> cast;
    cast.inputs.reserve(data.samples.size());
    cast.targets.reserve(data.samples.size());
    for (const auto& s : data.samples) {
        cast.inputs.emplace_back(s.input.begin(), s.input.end());
        cast.targets.emplace_back(s.target.begin(), s.target.end());
    }

    std::vector<TrainedModel> models(opt.n_seeds);
    parallel_for(opt.n_seeds, [&](std::size_t si) {
        const std::uint64_t model_seed = splitmix64(opt.seed ^ (0x9e3779b97f4a7c15ull * (si + 1)));
        models[si] = train_one<T>(data, cast, train_idx, val_idx, opt, model_seed);
    });
    return models;
}

template std::vector<TrainedModel> train<float>(const Dataset&, const TrainSplit&,
                                                const TrainOptions&);
template std::vector<TrainedModel> train<double>(const Dataset&, const TrainSplit&,
                                                 const TrainOptions&);

// ---------------------------------------------------------------------------
// evaluation

ReconEvaluator::ReconEvaluator(const std::vector<TrainedModel>& ensemble, const StaticStack& stat) {
    if (ensemble.empty()) throw ConfigError("empty model ensemble");
    for (const auto& m : ensemble) {
        if (m.params.size() != model_parameter_count(m.config))
            throw ConfigError("model parameter blob does not match its config");
        ReconNet<float> net(m.config);
        for (std::size_t i = 0; i < m.params.size(); ++i)
            net.params()[i] = static_cast<float>(m.params[i]);
        net.set_static(stat);
        nets_.push_back(std::move(net));
    }
}

const ModelConfig& ReconEvaluator::config() const { return nets_.front().config(); }

Field2 ReconEvaluator::reconstruct_seed(int seed_idx, std::span<const double> indices, int year,
                                        int month) const {
    const std::vector<double> x = encode_inputs(indices, year, month, config());
    std::vector<float> xf(x.begin(), x.end());
    const auto& net = nets_[seed_idx];
    net.forward(xf, ws_);
    Field2 out(net.grid_h(), net.grid_w());
    for (std::size_t p = 0; p < out.v.size(); ++p) out.v[p] = ws_.output[p];
    return out;
}

Field2 ReconEvaluator::reconstruct(std::span<const double> indices, int year, int month) const {
    Field2 acc = reconstruct_seed(0, indices, year, month);
    for (int s = 1; s < n_seeds(); ++s) {
        const Field2 f = reconstruct_seed(s, indices, year, month);
        for (std::size_t p = 0; p < acc.v.size(); ++p) acc.v[p] += f.v[p];
    }
    for (double& v : acc.v) v /= double(n_seeds());
    return acc;
}

Field2 ReconEvaluator::reconstruct_members(const std::vector<std::vector<double>>& member_indices,
                                           int year, int month) const {
    if (member_indices.empty()) throw ConfigError("no ensemble members");
    Field2 acc = reconstruct(member_indices[0], year, month);
    for (std::size_t m = 1; m < member_indices.size(); ++m) {
        const Field2 f = reconstruct(member_indices[m], year, month);
        for (std::size_t p = 0; p < acc.v.size(); ++p) acc.v[p] += f.v[p];
    }
    for (double& v : acc.v) v /= double(member_indices.size());
    return acc;
}

// ---------------------------------------------------------------------------
// persistence

void save_model(const TrainedModel& model, const std::string& path) {
    ordered_json h;
    h["magic"] = "RCM1";
    h["n_indices"] = model.config.n_indices;
    h["width"] = model.config.width;
    h["channels"] = model.config.schedule();
    h["kernel"] = model.config.kernel;
    h["year_offset"] = model.config.year_offset;
    h["year_scale"] = model.config.year_scale;
    h["seed"] = model.seed;
    h["stop_epoch"] = model.stop_epoch;
    h["best_val_mse"] = model.best_val_mse;
    h["n_params"] = model.params.size();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError(FormatErrc::io_failure, "cannot open for write: " + path);
    os << h.dump() << '\n';
    os.write(reinterpret_cast<const char*>(model.params.data()),
             static_cast<std::streamsize>(model.params.size() * sizeof(double)));
    if (!os) throw FormatError(FormatErrc::io_failure, "write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(FormatErrc::io_failure, "cannot open: " + path);
    std::string header;
    if (!std::getline(is, header))
        throw FormatError(FormatErrc::bad_header, "missing header line: " + path);
    ordered_json h;
    try {
        h = ordered_json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatErrc::bad_header, "unparsable header: " + std::string(e.what()));
    }
    if (h.value("magic", "") != "RCM1")
        throw FormatError(FormatErrc::bad_magic, "bad magic in model file: " + path);

    TrainedModel m;
    m.config.n_indices = h.at("n_indices").get<int>();
    m.config.width = h.at("width").get<int>();
    m.config.channels = h.at("channels").get<std::vector<int>>();
    m.config.kernel = h.value("kernel", 3);
    m.config.year_offset = h.value("year_offset", 1940.0);
    m.config.year_scale = h.value("year_scale", 100.0);
    m.seed = h.value("seed", std::uint64_t(0));
    m.stop_epoch = h.value("stop_epoch", 0);
    m.best_val_mse = h.value("best_val_mse", 0.0);
    const std::size_t n = h.at("n_params").get<std::size_t>();
    if (n != model_parameter_count(m.config))
        throw FormatError(FormatErrc::dimension_mismatch, "parameter count mismatch: " + path);
    m.params.resize(n);
    is.read(reinterpret_cast<char*>(m.params.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::size_t>(is.gcount()) != n * sizeof(double))
        throw FormatError(FormatErrc::truncated_payload, "truncated payload: " + path);
    return m;
}

void write_history_csv(const TrainedModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError(FormatErrc::io_failure, "cannot open for write: " + path);
    os << "epoch,train_mse,val_mse\n";
    char buf[96];
    for (const auto& e : model.history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse);
        os << buf;
    }
}

} // namespace rrecon
