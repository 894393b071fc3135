#pragma once

#include "jz/autodiff.hpp"
#include "jz/checking.hpp"
#include "jz/checkpoint.hpp"
#include "jz/commands.hpp"
#include "jz/common.hpp"
#include "jz/config.hpp"
#include "jz/corpus.hpp"
#include "jz/corruption.hpp"
#include "jz/curriculum.hpp"
#include "jz/finetune.hpp"
#include "jz/losses.hpp"
#include "jz/metrics.hpp"
#include "jz/model.hpp"
#include "jz/optim.hpp"
#include "jz/rng.hpp"
#include "jz/tensor.hpp"
#include "jz/vocab.hpp"
