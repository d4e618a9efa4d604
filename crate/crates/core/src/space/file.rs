//! JSON space documents.
//!
//! ```json
//! {
//!   "parameters": [
//!     {"name": "algo", "type": "categorical", "choices": ["svm", "rf"], "default": "svm"},
//!     {"name": "C", "type": "float", "bounds": [0.01, 100], "log": true, "default": 1.0}
//!   ],
//!   "conditions": [
//!     {"child": "C", "parent": "algo", "op": "eq", "value": "svm"}
//!   ]
//! }
//! ```

use serde_json::{json, Map, Value as Json};

use super::{Condition, ConfigurationSpace, Domain, Parameter, Predicate, SpaceError, Value};

fn doc_err(path: impl Into<String>, message: impl Into<String>) -> SpaceError {
    SpaceError::Document {
        path: path.into(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Json>, path: &str, key: &str) -> Result<&'a Json, SpaceError> {
    obj.get(key)
        .ok_or_else(|| doc_err(path, format!("missing field \"{key}\"")))
}

fn scalar(v: &Json, path: &str) -> Result<Value, SpaceError> {
    Value::from_json(v).ok_or_else(|| doc_err(path, "expected a scalar (number, string or bool)"))
}

fn parse_parameter(v: &Json, path: &str) -> Result<Parameter, SpaceError> {
    let obj = v.as_object().ok_or_else(|| doc_err(path, "expected an object"))?;
    let name = field(obj, path, "name")?
        .as_str()
        .ok_or_else(|| doc_err(format!("{path}.name"), "expected a string"))?
        .to_string();
    let kind = field(obj, path, "type")?
        .as_str()
        .ok_or_else(|| doc_err(format!("{path}.type"), "expected a string"))?;
    let log = match obj.get("log") {
        None => false,
        Some(Json::Bool(b)) => *b,
        Some(_) => return Err(doc_err(format!("{path}.log"), "expected a bool")),
    };
    let bounds = |as_int: bool| -> Result<(Json, Json), SpaceError> {
        let bpath = format!("{path}.bounds");
        let arr = field(obj, path, "bounds")?
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| doc_err(&bpath, "expected [lo, hi]"))?;
        for (i, b) in arr.iter().enumerate() {
            let ok = if as_int { b.as_i64().is_some() } else { b.as_f64().is_some() };
            if !ok {
                let what = if as_int { "an integer" } else { "a number" };
                return Err(doc_err(format!("{bpath}[{i}]"), format!("expected {what}")));
            }
        }
        Ok((arr[0].clone(), arr[1].clone()))
    };
    let choices = || -> Result<Vec<Value>, SpaceError> {
        let key = if obj.contains_key("choices") { "choices" } else { "levels" };
        let cpath = format!("{path}.{key}");
        field(obj, path, key)?
            .as_array()
            .ok_or_else(|| doc_err(&cpath, "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, c)| scalar(c, &format!("{cpath}[{i}]")))
            .collect()
    };
    let mut param = match kind {
        "float" => {
            let (lo, hi) = bounds(false)?;
            let (lo, hi) = (lo.as_f64().unwrap(), hi.as_f64().unwrap());
            if log && lo > 0.0 && lo < hi {
                Parameter::log_float(name, lo, hi)
            } else {
                Parameter {
                    domain: Domain::Float { lo, hi, log },
                    ..Parameter::float(name, lo, hi)
                }
            }
        }
        "int" | "integer" => {
            let (lo, hi) = bounds(true)?;
            let (lo, hi) = (lo.as_i64().unwrap(), hi.as_i64().unwrap());
            if log && lo > 0 && lo < hi {
                Parameter::log_integer(name, lo, hi)
            } else {
                Parameter {
                    domain: Domain::Integer { lo, hi, log },
                    ..Parameter::integer(name, lo, hi)
                }
            }
        }
        "categorical" => Parameter::categorical(name, choices()?),
        "ordinal" => Parameter::ordinal(name, choices()?),
        other => {
            return Err(doc_err(
                format!("{path}.type"),
                format!("unknown kind '{other}' (expected float, int, categorical or ordinal)"),
            ))
        }
    };
    if let Some(d) = obj.get("default") {
        let raw = scalar(d, &format!("{path}.default"))?;
        param.default = param
            .domain
            .coerce(&raw)
            .ok_or_else(|| doc_err(format!("{path}.default"), format!("'{raw}' does not fit the domain")))?;
    }
    Ok(param)
}

fn parse_condition(v: &Json, path: &str) -> Result<Condition, SpaceError> {
    let obj = v.as_object().ok_or_else(|| doc_err(path, "expected an object"))?;
    let name = |key: &str| -> Result<String, SpaceError> {
        field(obj, path, key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| doc_err(format!("{path}.{key}"), "expected a string"))
    };
    let child = name("child")?;
    let parent = name("parent")?;
    let op = name("op")?;
    let value = field(obj, path, "value")?;
    let vpath = format!("{path}.value");
    let predicate = match op.as_str() {
        "eq" => Predicate::Equals(scalar(value, &vpath)?),
        "in" => Predicate::In(
            value
                .as_array()
                .ok_or_else(|| doc_err(&vpath, "op \"in\" expects an array"))?
                .iter()
                .enumerate()
                .map(|(i, x)| scalar(x, &format!("{vpath}[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        other => return Err(doc_err(format!("{path}.op"), format!("unknown op '{other}' (expected eq or in)"))),
    };
    Ok(Condition {
        child,
        parent,
        predicate,
    })
}

/// Parses a JSON space document. Errors carry the JSON path (or line and
/// column for syntax errors) of the offending element.
pub fn parse_space(text: &str) -> Result<ConfigurationSpace, SpaceError> {
    let doc: Json = serde_json::from_str(text).map_err(|e| SpaceError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = doc.as_object().ok_or_else(|| doc_err("$", "expected a top-level object"))?;
    let params = field(obj, "$", "parameters")?
        .as_array()
        .ok_or_else(|| doc_err("parameters", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, p)| parse_parameter(p, &format!("parameters[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let conditions = match obj.get("conditions") {
        None => Vec::new(),
        Some(c) => c
            .as_array()
            .ok_or_else(|| doc_err("conditions", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, c)| parse_condition(c, &format!("conditions[{i}]")))
            .collect::<Result<Vec<_>, _>>()?,
    };
    // Tie structural errors to their position in the document.
    for (i, c) in conditions.iter().enumerate() {
        for n in [&c.child, &c.parent] {
            if !params.iter().any(|p| &p.name == n) {
                return Err(doc_err(
                    format!("conditions[{i}]"),
                    format!("references undeclared parameter '{n}'"),
                ));
            }
        }
    }
    ConfigurationSpace::new(params, conditions).map_err(|e| match e {
        SpaceError::Cycle(name) => doc_err("conditions", format!("cyclic conditions through '{name}'")),
        other => other,
    })
}

impl ConfigurationSpace {
    pub fn to_json(&self) -> Json {
        let params: Vec<Json> = self
            .params
            .iter()
            .map(|p| {
                let mut m = Map::new();
                m.insert("name".into(), json!(p.name));
                match &p.domain {
                    Domain::Float { lo, hi, log } => {
                        m.insert("type".into(), json!("float"));
                        m.insert("bounds".into(), json!([lo, hi]));
                        m.insert("log".into(), json!(log));
                    }
                    Domain::Integer { lo, hi, log } => {
                        m.insert("type".into(), json!("int"));
                        m.insert("bounds".into(), json!([lo, hi]));
                        m.insert("log".into(), json!(log));
                    }
                    Domain::Categorical { choices } => {
                        m.insert("type".into(), json!("categorical"));
                        m.insert("choices".into(), Json::Array(choices.iter().map(Value::to_json).collect()));
                    }
                    Domain::Ordinal { levels } => {
                        m.insert("type".into(), json!("ordinal"));
                        m.insert("choices".into(), Json::Array(levels.iter().map(Value::to_json).collect()));
                    }
                }
                m.insert("default".into(), p.default.to_json());
                Json::Object(m)
            })
            .collect();
        let conditions: Vec<Json> = self
            .conditions
            .iter()
            .map(|c| {
                let (op, value) = match &c.predicate {
                    Predicate::Equals(v) => ("eq", v.to_json()),
                    Predicate::In(vs) => ("in", Json::Array(vs.iter().map(Value::to_json).collect())),
                };
                json!({"child": c.child, "parent": c.parent, "op": op, "value": value})
            })
            .collect();
        json!({"parameters": params, "conditions": conditions})
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("space serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASH: &str = r#"{
      "parameters": [
        {"name": "algo", "type": "categorical", "choices": ["svm", "rf"], "default": "svm"},
        {"name": "C", "type": "float", "bounds": [0.01, 100], "log": true, "default": 1},
        {"name": "kernel", "type": "categorical", "choices": ["rbf", "linear"]},
        {"name": "gamma", "type": "float", "bounds": [0.0001, 1], "log": true},
        {"name": "n_trees", "type": "int", "bounds": [10, 500], "default": 100}
      ],
      "conditions": [
        {"child": "C", "parent": "algo", "op": "eq", "value": "svm"},
        {"child": "kernel", "parent": "algo", "op": "eq", "value": "svm"},
        {"child": "gamma", "parent": "kernel", "op": "in", "value": ["rbf"]},
        {"child": "n_trees", "parent": "algo", "op": "eq", "value": "rf"}
      ]
    }"#;

    #[test]
    fn minimal_document() {
        let s = parse_space(r#"{"parameters": [{"name": "x", "type": "float", "bounds": [0, 1]}]}"#).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.default_configuration().get_f64("x"), Some(0.5));
    }

    #[test]
    fn undeclared_parent_is_positioned() {
        let text = r#"{"parameters": [{"name": "x", "type": "float", "bounds": [0, 1]}],
                       "conditions": [{"child": "x", "parent": "nope", "op": "eq", "value": 1}]}"#;
        let err = parse_space(text).unwrap_err();
        assert!(err.to_string().contains("conditions[0]"), "{err}");
    }

    #[test]
    fn unknown_kind_is_positioned() {
        let text = r#"{"parameters": [{"name": "x", "type": "float", "bounds": [0, 1]},
                                      {"name": "y", "type": "complex"}]}"#;
        let err = parse_space(text).unwrap_err();
        assert!(err.to_string().contains("parameters[1].type"), "{err}");
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_space("{\n  \"parameters\": [,]\n}").unwrap_err();
        assert!(matches!(err, SpaceError::Json { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn cycle_rejected() {
        let text = r#"{"parameters": [
            {"name": "a", "type": "categorical", "choices": ["x", "y"]},
            {"name": "b", "type": "categorical", "choices": ["x", "y"]}],
          "conditions": [
            {"child": "a", "parent": "b", "op": "eq", "value": "x"},
            {"child": "b", "parent": "a", "op": "eq", "value": "x"}]}"#;
        let err = parse_space(text).unwrap_err();
        assert!(err.to_string().contains("cyclic"), "{err}");
    }

    #[test]
    fn cash_document_activity() {
        let s = parse_space(CASH).unwrap();
        let mut v = std::collections::BTreeMap::new();
        v.insert("algo".to_string(), Value::from("svm"));
        v.insert("kernel".to_string(), Value::from("linear"));
        let active: Vec<_> = s.active_parameters(&v).into_iter().collect();
        assert_eq!(active, vec!["C", "algo", "kernel"]);
        v.insert("algo".to_string(), Value::from("rf"));
        let active: Vec<_> = s.active_parameters(&v).into_iter().collect();
        assert_eq!(active, vec!["algo", "n_trees"]);
        // the integer default 1 was coerced to the float domain
        assert_eq!(s.default_configuration().get("C"), Some(&Value::Float(1.0)));
    }

    #[test]
    fn round_trip() {
        let s = parse_space(CASH).unwrap();
        let again = parse_space(&s.to_json_string()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.digest(), again.digest());
    }
}
