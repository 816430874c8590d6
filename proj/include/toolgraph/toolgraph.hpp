#pragma once

#include "toolgraph/actions.hpp"
#include "toolgraph/align.hpp"
#include "toolgraph/checkers.hpp"
#include "toolgraph/config.hpp"
#include "toolgraph/dot_export.hpp"
#include "toolgraph/embedding.hpp"
#include "toolgraph/errors.hpp"
#include "toolgraph/graph.hpp"
#include "toolgraph/lifecycle.hpp"
#include "toolgraph/metrics.hpp"
#include "toolgraph/rank.hpp"
#include "toolgraph/remote_embedding.hpp"
#include "toolgraph/serialize.hpp"
#include "toolgraph/server.hpp"
#include "toolgraph/tokenize.hpp"
