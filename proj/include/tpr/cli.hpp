#pragma once

namespace tpr {

/// Exit status: 0 success, 1 usage error, 2 runtime failure.
int cli_dispatch(int argc, char** argv);

}  // namespace tpr
