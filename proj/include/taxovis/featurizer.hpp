#pragma once

#include "taxovis/blocks.hpp"
#include "taxovis/synth.hpp"
#include "taxovis/tcm.hpp"

namespace taxovis {

// Patch embeddings for a rendered clip. Video tokens come from 8x8 patches
// (one token per patch per frame) projected to D with a fixed sinusoidal
// space-time encoding added; pixel tokens come from 4x4 patches projected to
// Dm on a grid that matches the mask resolution exactly, with the same style
// of encoding so masks can localize identical-looking instances.
struct FeaturizerVars {
  LinearVars patch;  // (8*8*3) -> D
  LinearVars pixel;  // (4*4*3) -> Dm
};

FeaturizerVars bind_featurizer(Binder& bind, const std::string& prefix, int D, int Dm);

// Fixed space-time encoding, (T*Hf*Wf) x D: columns split into a time group
// of D - 2*(D/3) and y/x groups of D/3 each; within a group of size g,
// column c encodes sin/cos of v / 10000^(2*floor(c/2)/g).
Matrix space_time_pe(int T, int Hf, int Wf, int D);

// Raw patch rows for a clip, (T * (H/p) * (W/p)) x (p*p*3), values in [0,1],
// rows ordered (t, patch_y, patch_x), columns ordered (dy, dx, channel).
Matrix patch_rows(const VideoClip& clip, int p);

struct ClipFeatures {
  VideoFeatures video;  // values = projection + encoding, on the feature grid
  Var F;                // the same values as a tape node (gradients flow to patch proj)
  Var pixel;            // (T*Hm*Wm) x Dm pixel embeddings
  int T = 0, Hf = 0, Wf = 0;
  int Hm = 0, Wm = 0;
};

ClipFeatures featurize(ad::Tape& tape, const VideoClip& clip, const FeaturizerVars& v);

}  // namespace taxovis
