#ifndef UPLIFT_LOG_H_
#define UPLIFT_LOG_H_

#include <string_view>

namespace uplift::log {

enum class Level { kQuiet = 0, kWarning = 1, kInfo = 2 };

void set_level(Level level);
Level level();

void warning(std::string_view message);
void info(std::string_view message);

}  // namespace uplift::log

#endif  // UPLIFT_LOG_H_
