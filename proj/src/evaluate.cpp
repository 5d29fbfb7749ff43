// Copyright Contributors to the dynsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "dynsplat/evaluate.hpp"

#include "dynsplat/losses.hpp"
#include "dynsplat/rasterizer.hpp"

#include <json.hpp>

namespace dynsplat {

std::string EvaluationReport::to_json() const {
  nlohmann::json j;
  j["views"] = nlohmann::json::array();
  for (const auto &v : views)
    j["views"].push_back({{"frame", v.frame}, {"psnr", v.psnr}, {"ssim", v.ssim}});
  j["mean_psnr"] = mean_psnr;
  j["mean_ssim"] = mean_ssim;
  if (mean_mask_iou) {
    j["mask_iou"] = mask_iou;
    j["mean_mask_iou"] = *mean_mask_iou;
  }
  return j.dump(2);
}

std::vector<HeldOutView> evaluation_views(const SceneDataset &ds) {
  if (!ds.heldout.empty())
    return ds.heldout;
  std::vector<HeldOutView> views;
  for (int t = 0; t < ds.num_frames(); ++t)
    views.push_back({t, ds.cameras[t], ds.images[t]});
  return views;
}

EvaluationReport evaluate(const GaussianSet &set, const SceneDataset &ds, const std::vector<HeldOutView> &views) {
  EvaluationReport rep;
  rep.views.resize(views.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < views.size(); ++i) {
    const RenderOutputs r = render(set, views[i].camera, views[i].frame);
    const ImageD color = r.color();
    rep.views[i] = {views[i].frame, psnr(color, views[i].image), ssim(color, views[i].image)};
  }
  for (const auto &v : rep.views) {
    rep.mean_psnr += v.psnr;
    rep.mean_ssim += v.ssim;
  }
  if (!rep.views.empty()) {
    rep.mean_psnr /= static_cast<double>(rep.views.size());
    rep.mean_ssim /= static_cast<double>(rep.views.size());
  }

  if (!ds.gt_dyn_masks.empty()) {
    const int nf = ds.num_frames();
    rep.mask_iou.resize(nf);
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < nf; ++t) {
      const ImageD m = render(set, ds.cameras[t], t).dyn_mask();
      Mask pred(m.width, m.height, 1);
      for (std::size_t p = 0; p < pred.data.size(); ++p)
        pred.data[p] = m.data[p] > 0.5;
      rep.mask_iou[t] = mask_iou(pred, ds.gt_dyn_masks[t]);
    }
    double s = 0.0;
    for (double v : rep.mask_iou)
      s += v;
    rep.mean_mask_iou = nf > 0 ? s / nf : 0.0;
  }
  return rep;
}

} // namespace dynsplat
