/* Branch-free LSTM pointwise loops, written so the compiler can vectorize
 * the exp/tanh calls (glibc libmvec) when built with -O3 -ffast-math. */
#ifndef DISKRUL_LSTM_CORE_H
#define DISKRUL_LSTM_CORE_H

#include <float.h>
#include <math.h>
#include <stddef.h>

/* tanh(x) = 1 - 2 / (exp(2x) + 1). The argument is clamped so exp stays
 * finite (fast-math assumes no infinities); |x| > 19.1 already rounds to
 * +-1 in double precision. Used because libmvec's double exp vectorizes
 * where double tanh does not. */
static inline double diskrul_tanh_d(double x)
{
    x = x > 20.0 ? 20.0 : (x < -20.0 ? -20.0 : x);
    return 1.0 - 2.0 / (exp(2.0 * x) + 1.0);
}

/* Results below the smallest normal number are flushed to zero:
 * saturated gates otherwise feed subnormals into every later step, and
 * subnormal arithmetic is tens of times slower on x86. Done per value so
 * the process-wide floating-point mode is left alone. */
#define DISKRUL_FLUSH(x, TINY) (((x) < (TINY) && (x) > -(TINY)) ? 0 : (x))

/* Sigmoid arguments are clamped to +-LIM (80 for float, 700 for double) so
 * exp never overflows; the clipped tails are below 2e-35 (float) and 1e-304
 * (double), so the outputs match the exact sigmoid to rounding. */
#define DISKRUL_CLAMP(x, LIM) ((x) > (LIM) ? (LIM) : ((x) < -(LIM) ? -(LIM) : (x)))

#define DISKRUL_DEFINE_FWD(NAME, T, EXP, TANH, LIM, TINY)                        \
static void NAME(const T *restrict z, const T *restrict c_prev,                  \
                 T *restrict gates, T *restrict c, T *restrict tc,               \
                 T *restrict h, ptrdiff_t H)                                     \
{                                                                                \
    ptrdiff_t j;                                                                 \
    for (j = 0; j < 2 * H; j++)                                                  \
        gates[j] = (T)1 / ((T)1 + EXP(-DISKRUL_CLAMP(z[j], (T)LIM)));            \
    for (j = 2 * H; j < 3 * H; j++)                                              \
        gates[j] = TANH(z[j]);                                                   \
    for (j = 3 * H; j < 4 * H; j++)                                              \
        gates[j] = (T)1 / ((T)1 + EXP(-DISKRUL_CLAMP(z[j], (T)LIM)));            \
    for (j = 0; j < H; j++) {                                                    \
        T cj = gates[j] * c_prev[j] + gates[H + j] * gates[2 * H + j];           \
        c[j] = DISKRUL_FLUSH(cj, (T)TINY);                                       \
    }                                                                            \
    for (j = 0; j < H; j++)                                                      \
        tc[j] = TANH(c[j]);                                                      \
    for (j = 0; j < H; j++) {                                                    \
        T hj = gates[3 * H + j] * tc[j];                                         \
        h[j] = DISKRUL_FLUSH(hj, (T)TINY);                                       \
    }                                                                            \
}

DISKRUL_DEFINE_FWD(lstm_fwd_row_d, double, exp, diskrul_tanh_d, 700, DBL_MIN)
DISKRUL_DEFINE_FWD(lstm_fwd_row_f, float, expf, tanhf, 80, FLT_MIN)

#define DISKRUL_DEFINE_BWD(NAME, T, TINY)                                        \
static void NAME(const T *restrict dh, const T *restrict dc_next,                \
                 const T *restrict gates, const T *restrict c_prev,              \
                 const T *restrict tc, T *restrict dz, T *restrict dc_prev,      \
                 ptrdiff_t H)                                                    \
{                                                                                \
    ptrdiff_t j;                                                                 \
    for (j = 0; j < H; j++) {                                                    \
        T f = gates[j], i = gates[H + j], g = gates[2 * H + j];                  \
        T o = gates[3 * H + j], t = tc[j];                                       \
        T dc = dc_next[j] + dh[j] * o * ((T)1 - t * t);                          \
        T df = dc * c_prev[j] * f * ((T)1 - f);                                  \
        T di = dc * g * i * ((T)1 - i);                                          \
        T dg = dc * i * ((T)1 - g * g);                                          \
        T dq = dh[j] * t * o * ((T)1 - o);                                       \
        T dp = dc * f;                                                           \
        dz[j] = DISKRUL_FLUSH(df, (T)TINY);                                      \
        dz[H + j] = DISKRUL_FLUSH(di, (T)TINY);                                  \
        dz[2 * H + j] = DISKRUL_FLUSH(dg, (T)TINY);                              \
        dz[3 * H + j] = DISKRUL_FLUSH(dq, (T)TINY);                              \
        dc_prev[j] = DISKRUL_FLUSH(dp, (T)TINY);                                 \
    }                                                                            \
}

DISKRUL_DEFINE_BWD(lstm_bwd_row_d, double, DBL_MIN)
DISKRUL_DEFINE_BWD(lstm_bwd_row_f, float, FLT_MIN)

#endif
