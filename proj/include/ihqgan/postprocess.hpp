#pragma once

#include "image.hpp"

namespace ihqgan::postprocess {

/// Fixed display-time denoising of generated images: rows 0-7 and 26-31 are
/// zeroed, the 18 interior rows pass through untouched. Idempotent; never
/// applied inside training losses.
inline ImageTensor post_process(const ImageTensor& image) {
    ImageTensor out = image;
    for (int r = 0; r < kImageSide; ++r) {
        if (r >= 8 && r <= 25) continue;
        for (int c = 0; c < kImageSide; ++c) out.at(r, c) = 0.0;
    }
    return out;
}

} // namespace ihqgan::postprocess
