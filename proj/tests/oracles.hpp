#pragma once
#include "rcmdp/harness.hpp"
