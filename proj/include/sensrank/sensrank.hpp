#pragma once

#include "sensrank/baselines.hpp"
#include "sensrank/dataset.hpp"
#include "sensrank/estimators.hpp"
#include "sensrank/models.hpp"
#include "sensrank/oracle.hpp"
#include "sensrank/report.hpp"
#include "sensrank/sampling.hpp"
