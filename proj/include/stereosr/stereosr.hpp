#pragma once

#include "stereosr/tensor.hpp"
#include "stereosr/ops.hpp"
#include "stereosr/conv.hpp"
#include "stereosr/attention_ops.hpp"
#include "stereosr/warp.hpp"
#include "stereosr/gradcheck.hpp"
#include "stereosr/nn.hpp"
#include "stereosr/ssim.hpp"
#include "stereosr/backbone.hpp"
#include "stereosr/pam.hpp"
#include "stereosr/costvol.hpp"
#include "stereosr/feedback.hpp"
#include "stereosr/network.hpp"
#include "stereosr/losses.hpp"
#include "stereosr/metrics.hpp"
#include "stereosr/image_io.hpp"
#include "stereosr/synthetic.hpp"
#include "stereosr/train.hpp"
