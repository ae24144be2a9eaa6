import cyclopts

_help = """
Rokhlindim : Rokhlin towers of free Z^m-actions on finite samples
=================================================================

* Scenario  : A JSON file describing a system and the stages to run
* Marker    : A set whose translates tile the sample in few blocks
* Cover     : Rokhlin towers generated by a controlled marker
* Crossed   : Approximation defect of the crossed product
"""

main = app = cyclopts.App(
    "rokhlindim",
    help=_help,
    help_format="markdown",
    group_commands="Stages",
    group_parameters="Options"
)
for _flag in ("--help", "--version"):
    if _flag in getattr(app, "_commands", {}):
        app._commands[_flag].group = "Help"

if __name__ == "__main__":
    main()
