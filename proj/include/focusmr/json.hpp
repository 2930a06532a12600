#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace focusmr {

// Reports are contractually byte-deterministic: keys sorted, floats printed
// with 9 significant digits, non-finite values as null. A tiny value tree on
// top of std::map gives all three for free.

inline std::string fmt_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

struct JValue {
    enum class Type { Null, Bool, Int, Real, Str, Arr, Obj };

    Type type = Type::Null;
    bool bval = false;
    long long ival = 0;
    double rval = 0.0;
    std::string sval;
    std::vector<JValue> arr;
    std::map<std::string, JValue> obj; // sorted keys by construction

    static JValue null() { return JValue{}; }
    static JValue boolean(bool v) {
        JValue j;
        j.type = Type::Bool;
        j.bval = v;
        return j;
    }
    static JValue integer(long long v) {
        JValue j;
        j.type = Type::Int;
        j.ival = v;
        return j;
    }
    static JValue real(double v) {
        JValue j;
        j.type = Type::Real;
        j.rval = v;
        return j;
    }
    static JValue str(std::string v) {
        JValue j;
        j.type = Type::Str;
        j.sval = std::move(v);
        return j;
    }
    static JValue array() {
        JValue j;
        j.type = Type::Arr;
        return j;
    }
    static JValue object() {
        JValue j;
        j.type = Type::Obj;
        return j;
    }

    void render(std::string& out) const {
        switch (type) {
        case Type::Null:
            out += "null";
            break;
        case Type::Bool:
            out += bval ? "true" : "false";
            break;
        case Type::Int:
            out += std::to_string(ival);
            break;
        case Type::Real:
            if (std::isfinite(rval))
                out += fmt_g9(rval);
            else
                out += "null";
            break;
        case Type::Str:
            render_string(sval, out);
            break;
        case Type::Arr: {
            out += '[';
            bool first = true;
            for (const auto& v : arr) {
                if (!first) out += ',';
                first = false;
                v.render(out);
            }
            out += ']';
            break;
        }
        case Type::Obj: {
            out += '{';
            bool first = true;
            for (const auto& [k, v] : obj) {
                if (!first) out += ',';
                first = false;
                render_string(k, out);
                out += ':';
                v.render(out);
            }
            out += '}';
            break;
        }
        }
    }

    std::string render() const {
        std::string out;
        render(out);
        return out;
    }

private:
    static void render_string(const std::string& s, std::string& out) {
        out += '"';
        for (unsigned char c : s) {
            switch (c) {
            case '"':
                out += "\\\"";
                break;
            case '\\':
                out += "\\\\";
                break;
            case '\n':
                out += "\\n";
                break;
            case '\r':
                out += "\\r";
                break;
            case '\t':
                out += "\\t";
                break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
            }
        }
        out += '"';
    }
};

} // namespace focusmr
