#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

namespace lowlat::testing {

// The subset of draft 2020-12 used by the bundled schemas: type, const, enum,
// required, properties, items, minItems, minimum, maximum,
// exclusiveMinimum and local $ref.
class SchemaCheck {
public:
    explicit SchemaCheck(nlohmann::json root) : root_(std::move(root)) {}

    std::vector<std::string> errors(const nlohmann::json& doc) const
    {
        std::vector<std::string> out;
        check(root_, doc, "$", out);
        return out;
    }

    // Against a sub-schema such as "/$defs/latency".
    std::vector<std::string> errors(const nlohmann::json& doc, const std::string& pointer) const
    {
        std::vector<std::string> out;
        check(root_.at(nlohmann::json::json_pointer(pointer)), doc, "$", out);
        return out;
    }

private:
    static bool is_type(const nlohmann::json& v, const std::string& t)
    {
        if (t == "object")
            return v.is_object();
        if (t == "array")
            return v.is_array();
        if (t == "string")
            return v.is_string();
        if (t == "boolean")
            return v.is_boolean();
        if (t == "null")
            return v.is_null();
        if (t == "integer")
            return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<long long>(v.get<double>()));
        if (t == "number")
            return v.is_number();
        return false;
    }

    const nlohmann::json& resolve(const std::string& ref) const
    {
        return root_.at(nlohmann::json::json_pointer(ref.substr(1)));
    }

    void check(const nlohmann::json& s, const nlohmann::json& v, const std::string& at,
               std::vector<std::string>& out) const
    {
        if (s.contains("$ref"))
            check(resolve(s["$ref"].get<std::string>()), v, at, out);
        if (s.contains("type")) {
            bool ok = false;
            if (s["type"].is_array()) {
                for (const auto& t : s["type"])
                    ok = ok || is_type(v, t.get<std::string>());
            } else {
                ok = is_type(v, s["type"].get<std::string>());
            }
            if (!ok) {
                out.push_back(at + ": expected type " + s["type"].dump());
                return;
            }
        }
        if (s.contains("const") && v != s["const"])
            out.push_back(at + ": expected " + s["const"].dump());
        if (s.contains("enum") && std::find(s["enum"].begin(), s["enum"].end(), v) == s["enum"].end())
            out.push_back(at + ": not in " + s["enum"].dump());
        if (v.is_number()) {
            const double x = v.get<double>();
            if (s.contains("minimum") && x < s["minimum"].get<double>())
                out.push_back(at + ": below minimum");
            if (s.contains("maximum") && x > s["maximum"].get<double>())
                out.push_back(at + ": above maximum");
            if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>())
                out.push_back(at + ": not above exclusiveMinimum");
        }
        if (v.is_object()) {
            if (s.contains("required"))
                for (const auto& k : s["required"])
                    if (!v.contains(k.get<std::string>()))
                        out.push_back(at + ": missing " + k.get<std::string>());
            if (s.contains("properties"))
                for (auto it = s["properties"].begin(); it != s["properties"].end(); ++it)
                    if (v.contains(it.key()))
                        check(it.value(), v[it.key()], at + "." + it.key(), out);
        }
        if (v.is_array()) {
            if (s.contains("minItems") && v.size() < s["minItems"].get<size_t>())
                out.push_back(at + ": too few items");
            if (s.contains("items"))
                for (size_t i = 0; i < v.size(); ++i)
                    check(s["items"], v[i], at + "[" + std::to_string(i) + "]", out);
        }
    }

    nlohmann::json root_;
};

} // namespace lowlat::testing
