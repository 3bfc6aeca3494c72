//! Physical multilayer sample description and the binding between named fit
//! parameters and stack fields.
//!
//! A stack is an ordered top-to-bottom sequence of layers and interfaces.
//! Adjacent layers without an explicit interface are in perfect thermal
//! contact. The bottom is either a semi-infinite terminal layer or an
//! adiabatic (insulated) finite layer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::param_space::{ParamDef, ParameterSpace, Scale};

/// Homogeneous layer; `h` is ignored when `terminal` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    /// Cross-plane thermal conductivity, W/(m*K).
    pub kz: f64,
    /// In-plane thermal conductivity, W/(m*K).
    pub kr: f64,
    /// Volumetric heat capacity, J/(m^3*K).
    pub c: f64,
    /// Thickness, m.
    pub h: f64,
    /// Semi-infinite bottom layer.
    pub terminal: bool,
}

/// Thermal interface with conductance `g` in W/(m^2*K).
///
/// Use a large sentinel (1e12) for near-perfect contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub name: String,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Element {
    Layer(Layer),
    Interface(Interface),
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Layer(l) => &l.name,
            Element::Interface(i) => &i.name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BottomBoundary {
    SemiInfinite,
    Adiabatic,
}

/// Ordered stack, top (heated surface) first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStack {
    elements: Vec<Element>,
    bottom_boundary: BottomBoundary,
}

impl SampleStack {
    pub fn new(elements: Vec<Element>, bottom_boundary: BottomBoundary) -> Result<Self> {
        let stack = SampleStack {
            elements,
            bottom_boundary,
        };
        stack.validate()?;
        Ok(stack)
    }

    fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(CoreError::InvalidStack(msg));
        let n = self.elements.len();
        if n == 0 {
            return err("stack is empty".into());
        }
        if !matches!(self.elements[0], Element::Layer(_)) {
            return err("stack must start with a layer".into());
        }
        if !matches!(self.elements[n - 1], Element::Layer(_)) {
            return err("stack must end with a layer".into());
        }
        let mut names = std::collections::HashSet::new();
        for (i, el) in self.elements.iter().enumerate() {
            if !names.insert(el.name().to_string()) {
                return err(format!("duplicate element name {:?}", el.name()));
            }
            match el {
                Element::Layer(l) => {
                    if l.kz <= 0.0 || l.kr <= 0.0 || l.c <= 0.0 {
                        return err(format!("layer {:?}: kz, kr, c must be positive", l.name));
                    }
                    if !l.terminal && l.h <= 0.0 {
                        return err(format!("layer {:?}: h must be positive", l.name));
                    }
                    if l.terminal && i != n - 1 {
                        return err(format!("layer {:?}: only the last layer may be terminal", l.name));
                    }
                }
                Element::Interface(f) => {
                    if f.g <= 0.0 {
                        return err(format!("interface {:?}: g must be positive", f.name));
                    }
                    if i + 1 < n {
                        if let Element::Interface(next) = &self.elements[i + 1] {
                            return err(format!(
                                "adjacent interfaces {:?}, {:?}",
                                f.name, next.name
                            ));
                        }
                    }
                }
            }
        }
        let last_terminal = matches!(&self.elements[n - 1], Element::Layer(l) if l.terminal);
        match self.bottom_boundary {
            BottomBoundary::SemiInfinite if !last_terminal => {
                err("semi-infinite bottom requires a terminal last layer".into())
            }
            BottomBoundary::Adiabatic if last_terminal => {
                err("adiabatic bottom requires a non-terminal last layer".into())
            }
            _ => Ok(()),
        }
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn bottom_boundary(&self) -> BottomBoundary {
        self.bottom_boundary
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.elements.iter().find_map(|e| match e {
            Element::Layer(l) if l.name == name => Some(l),
            _ => None,
        })
    }

    pub fn interface(&self, name: &str) -> Option<&Interface> {
        self.elements.iter().find_map(|e| match e {
            Element::Interface(i) if i.name == name => Some(i),
            _ => None,
        })
    }

    /// Current value of a bound field.
    pub fn read_field(&self, target: &BindingTarget) -> Result<f64> {
        let el = self
            .elements
            .iter()
            .find(|e| e.name() == target.element)
            .ok_or_else(|| CoreError::UnboundParameter(target.element.clone()))?;
        match (el, target.field) {
            (Element::Layer(l), Field::KIso) | (Element::Layer(l), Field::Kz) => Ok(l.kz),
            (Element::Layer(l), Field::Kr) => Ok(l.kr),
            (Element::Layer(l), Field::C) => Ok(l.c),
            (Element::Layer(l), Field::H) => Ok(l.h),
            (Element::Interface(i), Field::G) => Ok(i.g),
            _ => Err(CoreError::InvalidStack(format!(
                "field {:?} does not exist on element {:?}",
                target.field, target.element
            ))),
        }
    }

    /// Copy of the stack with one bound field overwritten.
    pub fn with_field(&self, target: &BindingTarget, value: f64) -> Result<SampleStack> {
        if value <= 0.0 || !value.is_finite() {
            return Err(CoreError::NonPositiveValue {
                name: target.element.clone(),
                value,
            });
        }
        let mut out = self.clone();
        let el = out
            .elements
            .iter_mut()
            .find(|e| e.name() == target.element)
            .ok_or_else(|| CoreError::UnboundParameter(target.element.clone()))?;
        match (el, target.field) {
            (Element::Layer(l), Field::KIso) => {
                l.kz = value;
                l.kr = value;
            }
            (Element::Layer(l), Field::Kz) => l.kz = value,
            (Element::Layer(l), Field::Kr) => l.kr = value,
            (Element::Layer(l), Field::C) => l.c = value,
            (Element::Layer(l), Field::H) => l.h = value,
            (Element::Interface(i), Field::G) => i.g = value,
            (_, f) => {
                return Err(CoreError::InvalidStack(format!(
                    "field {:?} does not exist on element {:?}",
                    f, target.element
                )))
            }
        }
        Ok(out)
    }
}

/// Addressable stack field.
///
/// `KIso` writes kz and kr together (isotropy rule); reading it returns kz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    KIso,
    Kz,
    Kr,
    C,
    H,
    G,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingTarget {
    pub element: String,
    pub field: Field,
}

/// Map from parameter name to the stack field it controls.
///
/// Covers fit parameters (consumed by [`resolve`]) and may also cover fixed
/// inputs so sensitivity analysis can perturb them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParameterBinding {
    map: BTreeMap<String, BindingTarget>,
}

impl ParameterBinding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(mut self, param: impl Into<String>, element: impl Into<String>, field: Field) -> Self {
        self.map.insert(
            param.into(),
            BindingTarget {
                element: element.into(),
                field,
            },
        );
        self
    }

    pub fn target(&self, param: &str) -> Option<&BindingTarget> {
        self.map.get(param)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BindingTarget)> {
        self.map.iter()
    }

    /// Check all targets exist on the stack and no physical field is claimed
    /// twice (KIso claims both kz and kr).
    pub fn validate(&self, stack: &SampleStack) -> Result<()> {
        let mut claimed = std::collections::HashSet::new();
        for (param, target) in &self.map {
            stack.read_field(target).map_err(|_| {
                CoreError::InvalidStack(format!(
                    "binding of {:?} targets missing field {:?}.{:?}",
                    param, target.element, target.field
                ))
            })?;
            let fields: &[&str] = match target.field {
                Field::KIso => &["kz", "kr"],
                Field::Kz => &["kz"],
                Field::Kr => &["kr"],
                Field::C => &["c"],
                Field::H => &["h"],
                Field::G => &["g"],
            };
            for f in fields {
                if !claimed.insert((target.element.clone(), *f)) {
                    return Err(CoreError::InvalidStack(format!(
                        "field {}.{} bound twice",
                        target.element, f
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Substitute physical fit-parameter values (ordered by the space's fit
/// layout) into a copy of the stack.
pub fn resolve(
    stack: &SampleStack,
    space: &ParameterSpace,
    binding: &ParameterBinding,
    physical: &[f64],
) -> Result<SampleStack> {
    if physical.len() != space.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: space.dim(),
            got: physical.len(),
        });
    }
    let mut out = stack.clone();
    for (def, &value) in space.fit_defs().zip(physical) {
        let target = binding
            .target(&def.name)
            .ok_or_else(|| CoreError::UnboundParameter(def.name.clone()))?;
        if value <= 0.0 || !value.is_finite() {
            return Err(CoreError::NonPositiveValue {
                name: def.name.clone(),
                value,
            });
        }
        out = out.with_field(target, value)?;
    }
    Ok(out)
}

/// GaN-on-Si heterostructure: Al transducer / G1 / GaN / AlGaN buffer / G2 /
/// Si substrate. Fixed inputs at their nominal values; the five fit
/// parameters (G1, k_GaN, C_GaN, k_AlGaN, k_Si, in vector order) carry
/// documented nominal values in the stack and log10 search ranges in the
/// space. All layers isotropic.
pub fn build_gan_si_stack() -> (SampleStack, ParameterSpace, ParameterBinding) {
    let truth = gan_si_truth();
    let stack = SampleStack::new(
        vec![
            Element::Layer(Layer {
                name: "al".into(),
                kz: 160.0,
                kr: 160.0,
                c: 2.44e6,
                h: 87.4e-9,
                terminal: false,
            }),
            Element::Interface(Interface {
                name: "g1".into(),
                g: truth[0],
            }),
            Element::Layer(Layer {
                name: "gan".into(),
                kz: truth[1],
                kr: truth[1],
                c: truth[2],
                h: 1080e-9,
                terminal: false,
            }),
            Element::Layer(Layer {
                name: "algan".into(),
                kz: truth[3],
                kr: truth[3],
                c: 2.6e6,
                h: 458e-9,
                terminal: false,
            }),
            Element::Interface(Interface {
                name: "g2".into(),
                g: 80e6,
            }),
            Element::Layer(Layer {
                name: "si".into(),
                kz: truth[4],
                kr: truth[4],
                c: 1.665e6,
                h: 0.0,
                terminal: true,
            }),
        ],
        BottomBoundary::SemiInfinite,
    )
    .expect("gan_si stack is valid by construction");

    let space = ParameterSpace::new(vec![
        ParamDef::fit("G1", 10e6, 300e6, Scale::Log10),
        ParamDef::fit("k_GaN", 1.0, 1000.0, Scale::Log10),
        ParamDef::fit("C_GaN", 0.5e6, 5e6, Scale::Log10),
        ParamDef::fit("k_AlGaN", 1.0, 500.0, Scale::Log10),
        ParamDef::fit("k_Si", 1.0, 1000.0, Scale::Log10),
        ParamDef::fixed("k_Al", 160.0),
        ParamDef::fixed("C_Al", 2.44e6),
        ParamDef::fixed("h_Al", 87.4e-9),
        ParamDef::fixed("h_GaN", 1080e-9),
        ParamDef::fixed("C_AlGaN", 2.6e6),
        ParamDef::fixed("h_AlGaN", 458e-9),
        ParamDef::fixed("G2", 80e6),
        ParamDef::fixed("C_Si", 1.665e6),
    ])
    .expect("gan_si parameter space is valid by construction");

    let binding = ParameterBinding::new()
        .bind("G1", "g1", Field::G)
        .bind("k_GaN", "gan", Field::KIso)
        .bind("C_GaN", "gan", Field::C)
        .bind("k_AlGaN", "algan", Field::KIso)
        .bind("k_Si", "si", Field::KIso)
        .bind("k_Al", "al", Field::KIso)
        .bind("C_Al", "al", Field::C)
        .bind("h_Al", "al", Field::H)
        .bind("h_GaN", "gan", Field::H)
        .bind("C_AlGaN", "algan", Field::C)
        .bind("h_AlGaN", "algan", Field::H)
        .bind("G2", "g2", Field::G)
        .bind("C_Si", "si", Field::C);
    binding
        .validate(&stack)
        .expect("gan_si binding is valid by construction");

    (stack, space, binding)
}

/// Nominal/truth values of the five GaN/Si fit parameters in SI units and
/// vector order: G1 [W/(m^2*K)], k_GaN, C_GaN [J/(m^3*K)], k_AlGaN, k_Si.
pub fn gan_si_truth() -> [f64; 5] {
    [150e6, 130.0, 2.64e6, 10.0, 140.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_build_matches_documented_geometry() {
        let (stack, space, _) = build_gan_si_stack();
        assert_eq!(stack.layer("al").unwrap().h, 87.4e-9);
        assert_eq!(stack.interface("g2").unwrap().g, 80e6);
        assert_eq!(space.dim(), 5);
        assert!(stack.layer("si").unwrap().terminal);
        assert_eq!(stack.layer("gan").unwrap().h, 1080e-9);
        assert_eq!(stack.layer("algan").unwrap().c, 2.6e6);
    }

    #[test]
    fn resolve_substitutes_isotropically() {
        let (stack, space, binding) = build_gan_si_stack();
        let resolved = resolve(&stack, &space, &binding, &[150e6, 130.0, 2.64e6, 10.0, 140.0]).unwrap();
        let si = resolved.layer("si").unwrap();
        assert_eq!(si.kz, 140.0);
        assert_eq!(si.kr, 140.0);
        // Input untouched (value semantics).
        assert_eq!(stack.layer("si").unwrap().kz, gan_si_truth()[4]);
    }

    #[test]
    fn resolve_round_trip() {
        let (stack, space, binding) = build_gan_si_stack();
        let phys = [222e6, 99.0, 1.5e6, 42.0, 555.0];
        let resolved = resolve(&stack, &space, &binding, &phys).unwrap();
        for (def, &expect) in space.fit_defs().zip(&phys) {
            let target = binding.target(&def.name).unwrap();
            assert_eq!(resolved.read_field(target).unwrap(), expect);
        }
    }

    #[test]
    fn resolve_rejects_nonpositive_and_unbound() {
        let (stack, space, binding) = build_gan_si_stack();
        let bad = [150e6, -1.0, 2.64e6, 10.0, 140.0];
        assert!(matches!(
            resolve(&stack, &space, &binding, &bad),
            Err(CoreError::NonPositiveValue { .. })
        ));
        let empty = ParameterBinding::new();
        assert!(matches!(
            resolve(&stack, &space, &empty, &[1.0; 5]),
            Err(CoreError::UnboundParameter(_))
        ));
    }

    #[test]
    fn resolve_with_no_fit_params_is_identity() {
        let (stack, _, _) = build_gan_si_stack();
        let space = ParameterSpace::new(vec![]).unwrap();
        let out = resolve(&stack, &space, &ParameterBinding::new(), &[]).unwrap();
        assert_eq!(out, stack);
    }

    #[test]
    fn stack_validation_rejects_malformed() {
        let layer = |name: &str| {
            Element::Layer(Layer {
                name: name.into(),
                kz: 1.0,
                kr: 1.0,
                c: 1.0e6,
                h: 1e-6,
                terminal: false,
            })
        };
        let iface = |name: &str| Element::Interface(Interface { name: name.into(), g: 1e8 });
        // Starts with an interface.
        assert!(SampleStack::new(vec![iface("i"), layer("a")], BottomBoundary::Adiabatic).is_err());
        // Adjacent interfaces.
        assert!(SampleStack::new(
            vec![layer("a"), iface("i"), iface("j"), layer("b")],
            BottomBoundary::Adiabatic
        )
        .is_err());
        // Semi-infinite bottom without terminal layer.
        assert!(SampleStack::new(vec![layer("a")], BottomBoundary::SemiInfinite).is_err());
        // Adjacent layers (perfect contact) are allowed.
        assert!(SampleStack::new(vec![layer("a"), layer("b")], BottomBoundary::Adiabatic).is_ok());
    }

    #[test]
    fn binding_rejects_double_claim() {
        let (stack, _, _) = build_gan_si_stack();
        let b = ParameterBinding::new()
            .bind("p", "gan", Field::KIso)
            .bind("q", "gan", Field::Kz);
        assert!(b.validate(&stack).is_err());
    }
}
