#pragma once

#include "svdclass/classifier.hpp"
#include "svdclass/cli.hpp"
#include "svdclass/errors.hpp"
#include "svdclass/imgio.hpp"
#include "svdclass/linalg.hpp"
#include "svdclass/matrix.hpp"
#include "svdclass/report.hpp"
#include "svdclass/synth.hpp"
#include "svdclass/templates.hpp"
