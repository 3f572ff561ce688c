// error.hpp - exception types shared by all sdmask modules
#ifndef SDMASK_ERROR_HPP_
#define SDMASK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sdmask
{

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Shape or parameter combinations that cannot be evaluated.
class ConfigError : public Error
{
public:
    using Error::Error;
};

// i32 accumulator left the representable range.
class OverflowError : public Error
{
public:
    using Error::Error;
};

// Malformed file contents (images, manifests, weight containers).
class FormatError : public Error
{
public:
    using Error::Error;
};

class IoError : public Error
{
public:
    using Error::Error;
};

} // namespace sdmask

#endif
