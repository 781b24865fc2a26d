/* Copyright 2026 The dynbatch Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef DYNBATCH_FIXTURES_H_
#define DYNBATCH_FIXTURES_H_

#include "dynbatch/graph.h"

namespace dynbatch::fixtures {

// Tree network over a 4-leaf left-spine parse tree: 3 internal (I) nodes,
// 7 output (O) nodes, and a 6-node reduction (R) chain.
DataflowGraph spine_tree();

// Two tree networks in sequence; the second has the internal and output
// roles swapped (internal cells typed O, outputs typed I) and is fed by the
// last reduction of the first. A frontier-type-set state cannot tell the
// two phases apart.
DataflowGraph swapped_tree_pair();

// 6 character cells with word cells spanning (1->3) and (2->5).
DataflowGraph small_lattice();

}  // namespace dynbatch::fixtures

#endif  // DYNBATCH_FIXTURES_H_
