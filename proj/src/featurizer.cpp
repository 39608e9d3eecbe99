#include "taxovis/featurizer.hpp"

#include <cmath>
#include <stdexcept>

namespace taxovis {

FeaturizerVars bind_featurizer(Binder& bind, const std::string& prefix, int D, int Dm) {
  FeaturizerVars v;
  v.patch = bind_linear(bind, prefix + ".patch", 8 * 8 * 3, D);
  v.pixel = bind_linear(bind, prefix + ".pixel", 4 * 4 * 3, Dm);
  return v;
}

namespace {

void fill_group(Matrix& pe, int row, int offset, int g, double v) {
  for (int c = 0; c < g; ++c) {
    const double angle = v / std::pow(10000.0, 2.0 * std::floor(c / 2.0) / g);
    pe(row, offset + c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
}

}  // namespace

Matrix space_time_pe(int T, int Hf, int Wf, int D) {
  const int gy = D / 3, gx = D / 3, gt = D - gy - gx;
  if (gt < 2 || gy < 2) throw std::invalid_argument("space_time_pe: D too small");
  Matrix pe(T * Hf * Wf, D);
  for (int t = 0; t < T; ++t) {
    for (int y = 0; y < Hf; ++y) {
      for (int x = 0; x < Wf; ++x) {
        const int row = (t * Hf + y) * Wf + x;
        fill_group(pe, row, 0, gt, t);
        fill_group(pe, row, gt, gy, y);
        fill_group(pe, row, gt + gy, gx, x);
      }
    }
  }
  return pe;
}

Matrix patch_rows(const VideoClip& clip, int p) {
  if (clip.H % p != 0 || clip.W % p != 0) {
    throw std::invalid_argument("patch_rows: frame size not divisible by patch size");
  }
  const int Hp = clip.H / p, Wp = clip.W / p;
  Matrix out(clip.T * Hp * Wp, p * p * 3);
  for (int t = 0; t < clip.T; ++t) {
    for (int py = 0; py < Hp; ++py) {
      for (int px = 0; px < Wp; ++px) {
        const int row = (t * Hp + py) * Wp + px;
        int col = 0;
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx)
            for (int c = 0; c < 3; ++c)
              out(row, col++) = clip.rgb(t, py * p + dy, px * p + dx, c) / 255.0;
      }
    }
  }
  return out;
}

ClipFeatures featurize(ad::Tape& tape, const VideoClip& clip, const FeaturizerVars& v) {
  if (clip.H % 8 != 0 || clip.W % 8 != 0) {
    throw std::invalid_argument("featurize: frame size must be divisible by 8");
  }
  const int D = static_cast<int>(val(v.patch.W).cols());
  ClipFeatures out;
  out.T = clip.T;
  out.Hf = clip.H / 8;
  out.Wf = clip.W / 8;
  out.Hm = clip.Hm;
  out.Wm = clip.Wm;

  Matrix pe = space_time_pe(out.T, out.Hf, out.Wf, D);
  Var proj = linear(ad::constant(tape, patch_rows(clip, 8)), v.patch);
  out.F = ad::add(proj, ad::constant(tape, pe));

  out.video.values = val(out.F);
  out.video.pos = std::move(pe);
  out.video.T = out.T;
  out.video.H = out.Hf;
  out.video.W = out.Wf;
  out.video.D = D;

  const int Dm = static_cast<int>(val(v.pixel.W).cols());
  Var pixel_proj = linear(ad::constant(tape, patch_rows(clip, 4)), v.pixel);
  out.pixel = ad::add(pixel_proj,
                      ad::constant(tape, space_time_pe(out.T, out.Hm, out.Wm, Dm)));
  return out;
}

}  // namespace taxovis
