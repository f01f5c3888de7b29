#pragma once

// Umbrella header: the whole engine.

#include "emoflow/backend.hpp"
#include "emoflow/cache.hpp"
#include "emoflow/chat.hpp"
#include "emoflow/dataset.hpp"
#include "emoflow/embedding.hpp"
#include "emoflow/ensemble.hpp"
#include "emoflow/error.hpp"
#include "emoflow/gateway.hpp"
#include "emoflow/http_backend.hpp"
#include "emoflow/knn.hpp"
#include "emoflow/label.hpp"
#include "emoflow/manifest.hpp"
#include "emoflow/metrics.hpp"
#include "emoflow/prediction_io.hpp"
#include "emoflow/prompt.hpp"
#include "emoflow/record.hpp"
#include "emoflow/strategy.hpp"
#include "emoflow/workflow.hpp"

namespace emoflow {
inline constexpr const char* kVersion = "0.1.0";
}
