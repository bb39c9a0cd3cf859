#pragma once

#include "autosec/attackpath.hpp"
#include "autosec/binding.hpp"
#include "autosec/blocks.hpp"
#include "autosec/bus.hpp"
#include "autosec/capability.hpp"
#include "autosec/diag_client.hpp"
#include "autosec/executors.hpp"
#include "autosec/isotp.hpp"
#include "autosec/orchestrator.hpp"
#include "autosec/report.hpp"
#include "autosec/sources.hpp"
#include "autosec/sut.hpp"
#include "autosec/uds.hpp"
#include "autosec/vehicle.hpp"
