#pragma once

#define ICPCOV_VERSION "0.1.0"
