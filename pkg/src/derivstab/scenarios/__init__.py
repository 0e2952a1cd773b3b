"""Bundled scenario presets, loadable by name through the command line.

Each `<name>.json` here is a complete scenario document; `derivstab run
<name>` resolves names in this package when no file with that name exists.
`quaternion_algebra.json` is a structure-constant algebra descriptor used
by scenarios rather than a scenario itself.
"""
