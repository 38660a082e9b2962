//! Validator for the JSON-Schema subset used by the shipped schema: `type`,
//! `enum`, `required`, `properties`, `additionalProperties: false`, `items`,
//! `oneOf`, `minimum` and local `$ref`s.

use serde_json::Value;

pub struct Schema {
    root: Value,
}

impl Schema {
    pub fn new(root: Value) -> Self {
        Schema { root }
    }

    pub fn validate(&self, v: &Value) -> Result<(), String> {
        self.check(&self.root, v, "$")
    }

    fn resolve<'a>(&'a self, reference: &str) -> &'a Value {
        let path = reference.strip_prefix("#/").expect("local reference");
        path.split('/').fold(&self.root, |node, key| &node[key])
    }

    fn check(&self, s: &Value, v: &Value, at: &str) -> Result<(), String> {
        if let Some(r) = s.get("$ref").and_then(Value::as_str) {
            return self.check(self.resolve(r), v, at);
        }
        if let Some(types) = s.get("type") {
            let allowed: Vec<&str> = match types {
                Value::String(t) => vec![t.as_str()],
                Value::Array(ts) => ts.iter().filter_map(Value::as_str).collect(),
                _ => return Err(format!("{at}: bad type clause")),
            };
            if !allowed.iter().any(|t| has_type(v, t)) {
                return Err(format!("{at}: expected {allowed:?}, got {v}"));
            }
        }
        if let Some(options) = s.get("enum").and_then(Value::as_array) {
            if !options.contains(v) {
                return Err(format!("{at}: {v} not in {options:?}"));
            }
        }
        if let Some(min) = s.get("minimum").and_then(Value::as_f64) {
            if v.as_f64().is_some_and(|x| x < min) {
                return Err(format!("{at}: {v} below {min}"));
            }
        }
        if let Some(branches) = s.get("oneOf").and_then(Value::as_array) {
            let matching = branches.iter().filter(|b| self.check(b, v, at).is_ok()).count();
            if matching != 1 {
                return Err(format!("{at}: {matching} oneOf branches match"));
            }
        }
        if let Some(obj) = v.as_object() {
            for key in s.get("required").and_then(Value::as_array).into_iter().flatten() {
                let key = key.as_str().unwrap_or_default();
                if !obj.contains_key(key) {
                    return Err(format!("{at}: missing `{key}`"));
                }
            }
            let props = s.get("properties").and_then(Value::as_object);
            let closed = s.get("additionalProperties") == Some(&Value::Bool(false));
            for (key, value) in obj {
                match props.and_then(|p| p.get(key)) {
                    Some(sub) => self.check(sub, value, &format!("{at}.{key}"))?,
                    None if closed => return Err(format!("{at}: unexpected `{key}`")),
                    None => {}
                }
            }
        }
        if let (Some(items), Some(arr)) = (s.get("items"), v.as_array()) {
            for (i, item) in arr.iter().enumerate() {
                self.check(items, item, &format!("{at}[{i}]"))?;
            }
        }
        Ok(())
    }
}

fn has_type(v: &Value, t: &str) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "integer" => v.is_i64() || v.is_u64(),
        "number" => v.is_number(),
        _ => false,
    }
}
