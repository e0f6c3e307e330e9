#pragma once

namespace gscls {

#ifdef GSCLS_REAL_FLOAT32
using Real = float;
#else
using Real = double;
#endif

}  // namespace gscls
