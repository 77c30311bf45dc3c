#pragma once

#include "depcar/classify.hpp"
#include "depcar/corpus.hpp"
#include "depcar/error.hpp"
#include "depcar/eval.hpp"
#include "depcar/featsel.hpp"
#include "depcar/rulemine.hpp"
