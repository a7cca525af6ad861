#pragma once

#include "pba/eval.hpp"
#include "pba/geometry.hpp"
#include "pba/image.hpp"
#include "pba/io.hpp"
#include "pba/photometric_ba.hpp"
#include "pba/pipeline.hpp"
#include "pba/selection.hpp"
#include "pba/stereo.hpp"
#include "pba/synthetic.hpp"
#include "pba/visibility.hpp"
#include "pba/window.hpp"
