#pragma once

// libtorch's logging header defines a glog-style CHECK; doctest's must win.
#include <torch/torch.h>
#undef CHECK
#include <doctest.h>
