#pragma once

#include "cpindoor/csv.hpp"
#include "cpindoor/dataset.hpp"
#include "cpindoor/error.hpp"
#include "cpindoor/eval_harness.hpp"
#include "cpindoor/nonconformity.hpp"
#include "cpindoor/paths.hpp"
#include "cpindoor/predictor.hpp"
#include "cpindoor/pvalue.hpp"
#include "cpindoor/random.hpp"
#include "cpindoor/report.hpp"
#include "cpindoor/risk_control.hpp"
#include "cpindoor/split_conformal.hpp"
#include "cpindoor/synthetic.hpp"
