from sslforge.cli.app import app

app()
