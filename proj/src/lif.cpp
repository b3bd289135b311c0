#include "popsan/lif.hpp"

#include <cmath>

namespace popsan {

void LIFParams::validate() const {
    require(w.rows >= 1 && w.cols >= 1, "LIF layer needs nonempty weights");
    require(static_cast<int>(b.size()) == w.rows, "bias length must equal n_out");
    require(d_c >= 0.0 && d_c < 1.0, "current decay must be in [0, 1)");
    require(d_v >= 0.0 && d_v < 1.0, "voltage decay must be in [0, 1)");
    require(v_th > v_rest, "threshold must exceed resting potential");
    require(surrogate_width > 0.0, "surrogate width must be positive");
}

void lif_step(const double* x_t, LIFState& state, const LIFParams& p, double* o_out) {
    const int n_out = p.n_out();
    require(static_cast<int>(state.c.size()) == n_out, "state sized for a different layer");
    require(all_finite(state.c) && all_finite(state.v), "non-finite LIF state rejected");

    // c <- d_c*c + W*x + b
    Vec drive(static_cast<size_t>(n_out));
    matvec(p.w, x_t, drive.data());
    for (int j = 0; j < n_out; ++j) {
        state.c[j] = p.d_c * state.c[j] + drive[j] + p.b[j];
        double v = p.d_v * state.v[j] * (1.0 - state.o_prev[j]) + state.c[j];
        if (v > p.v_th) {
            o_out[j] = 1.0;
            state.v[j] = p.v_rest;  // hard reset in the same timestep
        } else {
            o_out[j] = 0.0;
            state.v[j] = v;
        }
        state.o_prev[j] = o_out[j];
    }
}

std::pair<SpikeTrain, LIFTrace> lif_forward(const Mat& x, const LIFParams& p) {
    p.validate();
    require(x.rows >= 1, "need at least one timestep");
    require(x.cols == p.n_in(), "input width mismatch");
    const int timesteps = x.rows;
    const int n_out = p.n_out();

    LIFTrace trace;
    trace.inputs = x;
    trace.currents = Mat(timesteps, n_out);
    trace.voltages = Mat(timesteps, n_out);
    trace.spikes = Mat(timesteps, n_out);

    LIFState state(n_out);
    state.v.assign(static_cast<size_t>(n_out), p.v_rest);
    Vec drive(static_cast<size_t>(n_out));
    for (int t = 0; t < timesteps; ++t) {
        matvec(p.w, x.row(t), drive.data());
        double* c_row = trace.currents.row(t);
        double* v_row = trace.voltages.row(t);
        double* o_row = trace.spikes.row(t);
        for (int j = 0; j < n_out; ++j) {
            state.c[j] = p.d_c * state.c[j] + drive[j] + p.b[j];
            double v = p.d_v * state.v[j] * (1.0 - state.o_prev[j]) + state.c[j];
            c_row[j] = state.c[j];
            v_row[j] = v;  // pre-reset voltage, used by the surrogate
            if (v > p.v_th) {
                o_row[j] = 1.0;
                state.v[j] = p.v_rest;
            } else {
                o_row[j] = 0.0;
                state.v[j] = v;
            }
            state.o_prev[j] = o_row[j];
        }
        require(all_finite(state.c) && all_finite(state.v), "LIF state became non-finite");
    }

    SpikeTrain out;
    out.data = trace.spikes;
    return {std::move(out), std::move(trace)};
}

LIFGrads lif_backward(const Mat& dl_dout, const LIFTrace& trace, const LIFParams& p) {
    const int timesteps = trace.timesteps();
    const int n_out = p.n_out();
    require(trace.inputs.cols == p.n_in(), "trace/params input width mismatch");
    require(trace.currents.cols == n_out && trace.voltages.cols == n_out &&
                trace.spikes.cols == n_out,
            "trace/params output width mismatch");
    require(dl_dout.rows == timesteps && dl_dout.cols == n_out,
            "output-gradient shape mismatch");

    LIFGrads g;
    g.d_w = Mat(n_out, p.n_in());
    g.d_b.assign(static_cast<size_t>(n_out), 0.0);
    g.d_x = Mat(timesteps, p.n_in());

    Vec dv_next(static_cast<size_t>(n_out), 0.0);  // dL/dv_pre(t+1)
    Vec dc_next(static_cast<size_t>(n_out), 0.0);  // dL/dc(t+1)
    Vec dc(static_cast<size_t>(n_out));
    for (int t = timesteps - 1; t >= 0; --t) {
        const double* v_row = trace.voltages.row(t);
        const double* o_row = trace.spikes.row(t);
        const double* g_row = dl_dout.row(t);
        for (int j = 0; j < n_out; ++j) {
            // v_pre(t+1) = d_v*(1 - o(t))*v_pre(t) + c(t+1), gate held constant
            double dv = g_row[j] * surrogate_grad(v_row[j], p.v_th, p.surrogate_width) +
                        dv_next[j] * p.d_v * (1.0 - o_row[j]);
            dc[j] = dv + dc_next[j] * p.d_c;
            dv_next[j] = dv;
        }
        outer_acc(g.d_w, dc.data(), trace.inputs.row(t));
        for (int j = 0; j < n_out; ++j) g.d_b[j] += dc[j];
        matvec_t_acc(p.w, dc.data(), g.d_x.row(t));
        dc_next = dc;
    }
    return g;
}

std::pair<Mat, LIFTrace> lif_forward_surrogate(const Mat& x, const LIFParams& p,
                                               const Mat& frozen_gates) {
    p.validate();
    require(x.cols == p.n_in(), "input width mismatch");
    require(frozen_gates.rows == x.rows && frozen_gates.cols == p.n_out(),
            "frozen gate shape mismatch");
    const int timesteps = x.rows;
    const int n_out = p.n_out();

    LIFTrace trace;
    trace.inputs = x;
    trace.currents = Mat(timesteps, n_out);
    trace.voltages = Mat(timesteps, n_out);
    trace.spikes = frozen_gates;

    Mat out(timesteps, n_out);
    Vec c(static_cast<size_t>(n_out), 0.0);
    Vec v(static_cast<size_t>(n_out), p.v_rest);
    Vec drive(static_cast<size_t>(n_out));
    const double a = p.surrogate_width;
    for (int t = 0; t < timesteps; ++t) {
        matvec(p.w, x.row(t), drive.data());
        const double* gate_prev = t > 0 ? frozen_gates.row(t - 1) : nullptr;
        for (int j = 0; j < n_out; ++j) {
            c[j] = p.d_c * c[j] + drive[j] + p.b[j];
            const double gate = gate_prev ? 1.0 - gate_prev[j] : 1.0;
            v[j] = p.d_v * v[j] * gate + c[j];
            trace.currents(t, j) = c[j];
            trace.voltages(t, j) = v[j];
            double ramp = (v[j] - p.v_th) / a + 0.5;
            out(t, j) = ramp < 0.0 ? 0.0 : (ramp > 1.0 ? 1.0 : ramp);
        }
    }
    return {std::move(out), std::move(trace)};
}

}  // namespace popsan
