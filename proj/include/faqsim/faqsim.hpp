#pragma once

#include "errors.hpp"
#include "random.hpp"
#include "numfmt.hpp"
#include "faultmodel.hpp"
#include "lut.hpp"
#include "lut_oracle.hpp"
#include "model.hpp"
#include "mapper.hpp"
#include "faq.hpp"
#include "dataset.hpp"
#include "nn.hpp"
#include "retrain.hpp"
#include "io.hpp"
#include "harness.hpp"
