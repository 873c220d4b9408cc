#pragma once

#include "abonn/error.hpp"
#include "abonn/network.hpp"
#include "abonn/specification.hpp"
#include "abonn/bounds.hpp"
#include "abonn/simplex.hpp"
#include "abonn/leaf.hpp"
#include "abonn/tree.hpp"
#include "abonn/search.hpp"
#include "abonn/io.hpp"
#include "abonn/oracle.hpp"
#include "abonn/harness.hpp"
